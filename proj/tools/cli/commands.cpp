#include "commands.hpp"

#include "trj/io/obj.hpp"
#include "trj/io/wks_cache.hpp"
#include "trj/train/model_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace trj::cli {

namespace fs = std::filesystem;

void cmd_synth(const SynthOptions& o) {
  if (o.sequences < 1) throw Error("need at least one sequence");
  if (o.frames < 1) throw Error("need at least one frame");
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec || !fs::is_directory(o.out)) throw IoError("cannot create output directory " + o.out.string());
  const auto shapes = o.shapes.empty() ? io::sample_shapes(o.sequences, o.seed) : o.shapes;
  if (static_cast<int>(shapes.size()) < o.sequences) throw Error("fewer shapes than sequences");
  std::vector<std::string> dirs;
  for (int i = 0; i < o.sequences; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "seq_%03d", i);
    io::SynthConfig c;
    c.name = name;
    c.shape = shapes[static_cast<size_t>(i)];
    c.style = o.styles.empty() ? (i % 2 == 0 ? io::MotionStyle::kWalk : io::MotionStyle::kWave)
                               : o.styles[static_cast<size_t>(i) % o.styles.size()];
    c.frames = o.frames;
    c.frame_rate = o.frame_rate;
    c.seed = o.seed * 1000003ULL + static_cast<std::uint64_t>(i);
    c.root_motion = o.root_motion;
    auto seq = io::synth_generate(c);
    io::write_sequence(o.out / name, seq);
    dirs.emplace_back(name);
  }
  io::save_dataset_index(o.out, dirs);
}

std::vector<Positions> canonical_frames(const io::SequenceData& s) {
  const auto& g = s.manifest.global_transforms;
  if (g.empty()) return s.frames;
  std::vector<Positions> out;
  for (size_t t = 0; t < s.frames.size(); ++t) {
    Positions p = s.frames[t];
    p.rowwise() -= g[t].translation.transpose();
    out.push_back(p * g[t].rotation);  // rows times R equals applying Rᵀ
  }
  return out;
}

Eigen::RowVectorXd fit_beta(const Eigen::RowVectorXd& beta, int width) {
  if (beta.size() > width) {
    throw Error("shape signature has " + std::to_string(beta.size()) + " entries; the model takes " +
                std::to_string(width));
  }
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(width);
  out.head(beta.size()) = beta;
  return out;
}

std::vector<train::TrainingSample> load_samples(const std::vector<io::SequenceData>& data,
                                                const motion::ModelConfig& config, const fs::path& wks_cache) {
  std::vector<train::TrainingSample> samples;
  for (const auto& s : data) {
    if (s.frames.empty()) throw Error("sequence '" + s.name + "' has no ground-truth meshes");
    if (s.manifest.tree.joints() != config.joints) {
      throw Error("sequence '" + s.name + "' has " + std::to_string(s.manifest.tree.joints()) +
                  " joints; the model expects " + std::to_string(config.joints));
    }
    const auto frames = canonical_frames(s);
    mesh::TriMesh first{frames.front(), s.first_frame.faces};
    auto ctx = std::make_shared<motion::ShapeContext>(
        motion::ShapeContext::build(first, config.wks, io::cached_vertex_wks(first, config.wks, wks_cache)));
    motion::MotionInput m{s.manifest.angles, fit_beta(s.manifest.beta, config.shape_width)};
    samples.push_back(train::make_sample(s.name, std::move(ctx), std::move(m), frames));
  }
  return samples;
}

TrainSummary cmd_train(const TrainOptions& o) {
  if (o.checkpoint.empty()) throw Error("--checkpoint is required");
  const auto data = io::load_dataset(o.dataset);

  motion::ModelParams model;
  train::TrainingState state;
  std::optional<io::Checkpoint> resume_from;
  if (o.resume && fs::exists(o.checkpoint)) {
    auto loaded = train::load_model(o.checkpoint);
    model = std::move(loaded.params);
    state = loaded.state;
    resume_from = std::move(loaded.checkpoint);
  } else {
    motion::ModelConfig config;
    config.variant = motion::parse_variant(o.baseline);
    config.window = o.window;
    config.seed = o.seed;
    model = motion::ModelParams(config);
  }
  if (o.window < 1) throw Error("window length must be positive");

  const auto samples = load_samples(data, model.config(), o.wks_cache);

  train::TrainConfig tc;
  tc.max_epochs = o.epochs;
  tc.convergence = o.convergence;
  tc.alpha = o.alpha;
  tc.adam.lr = o.lr;
  tc.seed = o.seed;
  tc.freeze_residual = o.freeze_residual;
  train::Trainer trainer(model, tc);
  if (resume_from) {
    train::restore_optimizer(*resume_from, trainer.optimizer());
    trainer.set_start_epoch(state.epochs_completed);
  }

  const fs::path log_path = o.log.empty() ? fs::path(o.checkpoint.string() + ".log") : o.log;
  std::ofstream log(log_path, resume_from ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write training log " + log_path.string());
  trainer.on_epoch = [&](const train::EpochRecord& r) {
    char line[160];
    std::snprintf(line, sizeof(line), "%d %.9g %.9g %.9g", r.epoch, r.loss.vertex, r.loss.jacobian, r.loss.total);
    log << line << '\n' << std::flush;
    if (!o.quiet) std::cout << line << '\n';
  };

  TrainSummary out;
  out.result = trainer.fit(samples);
  state.epochs_completed = trainer.next_epoch();
  state.converged = out.result.converged || (state.converged && out.result.epochs_run == 0);
  if (!out.result.history.empty()) state.last_vertex_loss = out.result.history.back().loss.vertex;
  train::save_model(o.checkpoint, model, &trainer.optimizer(), state);
  out.epochs_completed = state.epochs_completed;
  out.exit_code = state.converged ? kExitOk : kExitEpochCapped;
  return out;
}

std::vector<Positions> predict(const motion::ModelParams& model, const train::TrainingSample& sample) {
  return motion::sequence_forward(model, *sample.context, sample.motion).frames;
}

void write_frames(const fs::path& dir, const FaceIndices& faces, const std::vector<Positions>& frames) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  for (size_t t = 0; t < frames.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04zu.obj", t);
    io::save_obj(dir / name, faces, frames[t]);
  }
}

std::vector<Positions> read_frames(const fs::path& dir, int count) {
  std::vector<Positions> frames;
  for (int t = 0; t < count; ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04d.obj", t);
    if (!fs::exists(dir / name)) {
      throw IoError(dir.string() + ": missing prediction for frame " + std::to_string(t) + " (" + name + ")");
    }
    frames.push_back(io::load_obj(dir / name).vertices);
  }
  char extra[32];
  std::snprintf(extra, sizeof(extra), "frame_%04d.obj", count);
  if (fs::exists(dir / extra)) {
    throw IoError(dir.string() + ": more predicted frames than the " + std::to_string(count) + " ground-truth frames");
  }
  return frames;
}

std::vector<Positions> cmd_infer(const InferOptions& o) {
  const auto loaded = train::load_model(o.checkpoint);
  const auto& model = loaded.params;
  const auto& cfg = model.config();
  const mesh::TriMesh target = io::load_obj(o.target);
  const auto manifest = io::load_motion(o.motion, false);
  if (manifest.tree.joints() != cfg.joints) {
    throw Error("motion has " + std::to_string(manifest.tree.joints()) + " joints; the model expects " +
                std::to_string(cfg.joints));
  }
  Eigen::RowVectorXd beta = manifest.beta;
  if (o.beta) beta = Eigen::Map<const Eigen::RowVectorXd>(o.beta->data(), static_cast<Eigen::Index>(o.beta->size()));

  const auto ctx = motion::ShapeContext::build(target, cfg.wks, io::cached_vertex_wks(target, cfg.wks, o.wks_cache));
  const motion::MotionInput m{manifest.angles, fit_beta(beta, cfg.shape_width)};
  auto frames = motion::sequence_forward(model, ctx, m).frames;

  if (o.apply_global && !manifest.global_transforms.empty()) {
    double scale = 1.0;
    if (!manifest.rest_mesh.empty()) {
      const auto source = o.motion.parent_path() / manifest.rest_mesh;
      if (fs::exists(source)) scale = mesh::height(target.vertices) / mesh::height(io::load_obj(source).vertices);
    }
    frames = motion::apply_global_transform(frames, manifest.global_transforms, scale);
  }
  if (!o.out.empty()) write_frames(o.out, target.faces, frames);
  return frames;
}

void write_metrics(const fs::path& path, const EvalSummary& summary) {
  auto record = [](const train::MetricReport& m) {
    return nlohmann::json{{"frames", m.frames},
                          {"l2_v_cm", m.l2_v_cm},
                          {"l2_j", m.l2_j},
                          {"l2_n_deg", m.l2_n_deg},
                          {"jitter_cm", m.jitter_cm}};
  };
  nlohmann::json j;
  j["records"] = nlohmann::json::array();
  for (const auto& r : summary.records) {
    auto rec = record(r.metrics);
    rec["name"] = r.name;
    j["records"].push_back(rec);
  }
  j["aggregate"] = record(summary.aggregate);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write metrics file " + path.string());
  out << j.dump(1) << '\n';
}

EvalSummary cmd_eval(const EvalOptions& o) {
  EvalSummary summary;
  train::MetricOptions mo;
  mo.align_translation = o.align_translation;
  if (!o.checkpoint.empty()) {
    const auto loaded = train::load_model(o.checkpoint);
    const auto data = io::load_dataset(o.dataset);
    const auto samples = load_samples(data, loaded.params.config(), o.wks_cache);
    for (const auto& s : samples) {
      summary.records.push_back({s.name, train::evaluate_frames(s.context->poisson, predict(loaded.params, s), s.frames, mo)});
    }
  } else {
    if (o.motion.empty()) throw Error("--motion (ground truth) is required when scoring prediction directories");
    if (o.predictions.empty()) throw Error("no prediction directories given");
    const auto gt = io::load_sequence(o.motion);
    if (gt.frames.empty()) throw Error(o.motion.string() + ": no ground-truth meshes to evaluate against");
    const auto system = mesh::PoissonSystem::prefactorize(gt.first_frame);
    for (const auto& dir : o.predictions) {
      const auto pred = read_frames(dir, static_cast<int>(gt.frames.size()));
      std::string name = dir.filename().string();
      if (name.empty()) name = dir.parent_path().filename().string();
      summary.records.push_back({name, train::evaluate_frames(system, pred, gt.frames, mo)});
    }
  }
  std::stable_sort(summary.records.begin(), summary.records.end(),
                   [](const EvalRecord& a, const EvalRecord& b) { return a.name < b.name; });
  std::vector<train::MetricReport> reports;
  for (const auto& r : summary.records) reports.push_back(r.metrics);
  summary.aggregate = train::aggregate(reports);
  if (!o.out.empty()) write_metrics(o.out, summary);
  return summary;
}

}  // namespace trj::cli
