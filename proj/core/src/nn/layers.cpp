#include "trj/nn/layers.hpp"

#include <cmath>
#include <numbers>

namespace trj::nn {

namespace {

Matrix init_matrix(int rows, int cols, Init init, Rng& rng) {
  Matrix m = Matrix::Zero(rows, cols);
  if (init == Init::kZero) return m;
  const double gain = init == Init::kKaimingUniform ? 6.0 : 3.0;
  const double bound = std::sqrt(gain / static_cast<double>(rows));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace

Linear::Linear(const std::string& name, int in, int out, Init init, Rng& rng)
    : weight_(name + ".weight", init_matrix(in, out, init, rng)), bias_(name + ".bias", Matrix::Zero(1, out)) {}

Var Linear::forward(const Var& x) const {
  if (x.cols() != in_features()) {
    throw ShapeError(weight_.name() + ": input " + shape_string(x.rows(), x.cols()) + " does not match weight " +
                     shape_string(weight_.value.rows(), weight_.value.cols()));
  }
  Tape& t = x.tape();
  return add_row(matmul(x, t.parameter(weight_)), t.parameter(bias_));
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

Mlp::Mlp(const std::string& name, MlpSpec spec, bool zero_output, Rng& rng) : spec_(std::move(spec)) {
  if (spec_.layers() < 1) throw Error("MLP " + name + " needs at least one layer");
  for (int l = 0; l < spec_.layers(); ++l) {
    const bool last = l + 1 == spec_.layers();
    const Init init = last ? (zero_output ? Init::kZero : Init::kLecunUniform) : Init::kKaimingUniform;
    layers_.emplace_back(name + ".l" + std::to_string(l), spec_.widths[l], spec_.widths[l + 1], init, rng);
  }
}

Var Mlp::forward(const Var& x) const {
  Var h = x;
  for (size_t l = 0; l < layers_.size(); ++l) {
    h = layers_[l].forward(h);
    if (l + 1 < layers_.size()) h = relu(h);
  }
  return h;
}

void Mlp::collect(std::vector<Parameter*>& out) {
  for (auto& l : layers_) l.collect(out);
}

MultiHeadAttention::MultiHeadAttention(const std::string& name, AttentionSpec spec, bool zero_output, Rng& rng)
    : spec_(spec) {
  if (spec_.input_width <= 0 || spec_.heads <= 0 || spec_.key_dim <= 0) {
    throw Error("attention " + name + ": widths and head count must be positive");
  }
  const int inner = spec_.heads * spec_.key_dim;
  query_ = Linear(name + ".query", spec_.input_width, inner, Init::kLecunUniform, rng);
  key_ = Linear(name + ".key", spec_.input_width, inner, Init::kLecunUniform, rng);
  value_ = Linear(name + ".value", spec_.input_width, inner, Init::kLecunUniform, rng);
  project_ = Linear(name + ".project", inner, spec_.ff_width, Init::kLecunUniform, rng);
  ff_hidden_ = Linear(name + ".ff_hidden", spec_.ff_width, spec_.ff_width, Init::kKaimingUniform, rng);
  ff_out_ = Linear(name + ".ff_out", spec_.ff_width, spec_.output_width,
                   zero_output ? Init::kZero : Init::kLecunUniform, rng);
}

Var MultiHeadAttention::forward(const Var& tokens, Eigen::Index tokens_per_group) const {
  if (tokens_per_group <= 0 || tokens.rows() == 0) throw ShapeError("attention over an empty window");
  const Var attended =
      attention_core(query_.forward(tokens), key_.forward(tokens), value_.forward(tokens), tokens_per_group,
                     spec_.heads);
  const Var mixed = project_.forward(attended);
  const Var ff = ff_out_.forward(relu(ff_hidden_.forward(mixed)));
  return segment_mean(ff, tokens_per_group);
}

void MultiHeadAttention::collect(std::vector<Parameter*>& out) {
  for (Linear* l : {&query_, &key_, &value_, &project_, &ff_hidden_, &ff_out_}) l->collect(out);
}

Eigen::RowVectorXd positional_encoding(double t, int bands) {
  Eigen::RowVectorXd e(2 * bands);
  for (int k = 0; k < bands; ++k) {
    const double w = std::ldexp(std::numbers::pi, k);
    e(2 * k) = std::sin(w * t);
    e(2 * k + 1) = std::cos(w * t);
  }
  return e;
}

}  // namespace trj::nn
