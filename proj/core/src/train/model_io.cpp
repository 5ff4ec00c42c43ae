#include "trj/train/model_io.hpp"

#include <json.hpp>

namespace trj::train {

using nlohmann::json;

namespace {

json config_json(const motion::ModelConfig& c) {
  return {{"variant", motion::to_string(c.variant)},
          {"joints", c.joints},
          {"shape_width", c.shape_width},
          {"window", c.window},
          {"posing_hidden", c.posing_hidden},
          {"residual_hidden", c.residual_hidden},
          {"time_bands", c.time_bands},
          {"pointnet",
           {{"learned_width", c.pointnet.learned_width},
            {"hidden_width", c.pointnet.hidden_width},
            {"global_context", c.pointnet.global_context}}},
          {"wks",
           {{"max_eigenpairs", c.wks.max_eigenpairs}, {"bins", c.wks.bins}, {"sigma_fraction", c.wks.sigma_fraction}}},
          {"attention",
           {{"heads", c.attention.heads},
            {"key_dim", c.attention.key_dim},
            {"ff_width", c.attention.ff_width},
            {"output_width", c.attention.output_width}}},
          {"seed", c.seed}};
}

motion::ModelConfig parse_config(const json& j) {
  motion::ModelConfig c;
  c.variant = motion::parse_variant(j.at("variant").get<std::string>());
  c.joints = j.at("joints").get<int>();
  c.shape_width = j.at("shape_width").get<int>();
  c.window = j.at("window").get<int>();
  c.posing_hidden = j.at("posing_hidden").get<int>();
  c.residual_hidden = j.at("residual_hidden").get<int>();
  c.time_bands = j.at("time_bands").get<int>();
  const json& p = j.at("pointnet");
  c.pointnet.learned_width = p.at("learned_width").get<int>();
  c.pointnet.hidden_width = p.at("hidden_width").get<int>();
  c.pointnet.global_context = p.at("global_context").get<bool>();
  const json& w = j.at("wks");
  c.wks.max_eigenpairs = w.at("max_eigenpairs").get<int>();
  c.wks.bins = w.at("bins").get<int>();
  c.wks.sigma_fraction = w.at("sigma_fraction").get<double>();
  const json& a = j.at("attention");
  c.attention.heads = a.at("heads").get<int>();
  c.attention.key_dim = a.at("key_dim").get<int>();
  c.attention.ff_width = a.at("ff_width").get<int>();
  c.attention.output_width = a.at("output_width").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string model_config_to_json(const motion::ModelConfig& config) { return config_json(config).dump(); }

motion::ModelConfig model_config_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    return parse_config(j.contains("model") ? j.at("model") : j);
  } catch (const json::exception& e) {
    throw IoError(std::string("bad model configuration: ") + e.what());
  }
}

io::Checkpoint make_model_checkpoint(motion::ModelParams& model, const nn::Adam* optimizer, const TrainingState& state) {
  io::Checkpoint ckpt;
  json meta = {{"model", config_json(model.config())},
               {"training",
                {{"epochs_completed", state.epochs_completed},
                 {"converged", state.converged},
                 {"last_vertex_loss", state.last_vertex_loss}}}};
  ckpt.config = meta.dump();
  // every network is stored so a checkpoint can seed any variant
  std::vector<nn::Parameter*> all;
  model.point_net.collect(all);
  model.posing.collect(all);
  model.pose_encoder.collect(all);
  model.residual_encoder.collect(all);
  model.residual.collect(all);
  model.velocity.collect(all);
  io::add_parameters(ckpt, all);
  if (optimizer != nullptr) {
    const nn::Adam* opt = optimizer;
    const auto& params = opt->params();
    for (size_t i = 0; i < params.size(); ++i) {
      ckpt.tensors.push_back(io::Tensor::from_matrix("adam.m." + params[i]->name(), opt->first_moments()[i]));
      ckpt.tensors.push_back(io::Tensor::from_matrix("adam.v." + params[i]->name(), opt->second_moments()[i]));
    }
    RowMatrix steps(1, 1);
    steps(0, 0) = static_cast<double>(opt->steps());
    ckpt.tensors.push_back(io::Tensor::from_matrix("adam.steps", steps));
  }
  return ckpt;
}

void save_model(const std::filesystem::path& path, motion::ModelParams& model, const nn::Adam* optimizer,
                const TrainingState& state) {
  io::save_checkpoint(path, make_model_checkpoint(model, optimizer, state));
}

LoadedModel load_model(const std::filesystem::path& path) {
  LoadedModel out;
  out.checkpoint = io::load_checkpoint(path);
  const motion::ModelConfig config = model_config_from_json(out.checkpoint.config);
  out.params = motion::ModelParams(config, false);
  std::vector<nn::Parameter*> all;
  out.params.point_net.collect(all);
  out.params.posing.collect(all);
  out.params.pose_encoder.collect(all);
  out.params.residual_encoder.collect(all);
  out.params.residual.collect(all);
  out.params.velocity.collect(all);
  io::restore_parameters(out.checkpoint, all);
  try {
    const json meta = json::parse(out.checkpoint.config);
    if (meta.contains("training")) {
      const json& t = meta.at("training");
      out.state.epochs_completed = t.value("epochs_completed", 0);
      out.state.converged = t.value("converged", false);
      out.state.last_vertex_loss = t.value("last_vertex_loss", 0.0);
    }
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": bad training state: " + e.what());
  }
  return out;
}

void restore_optimizer(const io::Checkpoint& checkpoint, nn::Adam& optimizer) {
  const auto& params = optimizer.params();
  for (size_t i = 0; i < params.size(); ++i) {
    RowMatrix m = checkpoint.at("adam.m." + params[i]->name()).to_matrix();
    RowMatrix v = checkpoint.at("adam.v." + params[i]->name()).to_matrix();
    if (m.rows() != params[i]->value.rows() || m.cols() != params[i]->value.cols() || v.rows() != m.rows() ||
        v.cols() != m.cols()) {
      throw IoError("optimizer state for '" + params[i]->name() + "' has the wrong shape");
    }
    optimizer.first_moments()[i] = std::move(m);
    optimizer.second_moments()[i] = std::move(v);
  }
  optimizer.restore_steps(static_cast<long>(checkpoint.at("adam.steps").to_matrix()(0, 0)));
}

}  // namespace trj::train
