#pragma once

#include "trj/nn/tape.hpp"

#include <random>

namespace trj::nn {

using Rng = std::mt19937_64;

enum class Init {
  kKaimingUniform,  // ReLU fan-in scaling
  kLecunUniform,    // linear output layers
  kZero,
};

/// y = x W + b, W stored input-major (in × out).
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out, Init init, Rng& rng);

  Var forward(const Var& x) const;
  int in_features() const { return static_cast<int>(weight_.value.rows()); }
  int out_features() const { return static_cast<int>(weight_.value.cols()); }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  void collect(std::vector<Parameter*>& out);

 private:
  mutable Parameter weight_;
  mutable Parameter bias_;
};

/// Layer widths including input and output; hidden layers use ReLU, the last is affine.
struct MlpSpec {
  std::vector<int> widths;

  int layers() const { return static_cast<int>(widths.size()) - 1; }
  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
};

class Mlp {
 public:
  Mlp() = default;
  /// `zero_output` zero-initializes the final affine layer.
  Mlp(const std::string& name, MlpSpec spec, bool zero_output, Rng& rng);

  Var forward(const Var& x) const;
  const MlpSpec& spec() const { return spec_; }
  std::vector<Linear>& layers() { return layers_; }
  void collect(std::vector<Parameter*>& out);

 private:
  MlpSpec spec_;
  std::vector<Linear> layers_;
};

struct AttentionSpec {
  int input_width = 0;
  int heads = 2;
  int key_dim = 32;      // per head, for keys and values
  int ff_width = 32;
  int output_width = 32;
};

/// Multi-head self-attention over the tokens of each group followed by a
/// feed-forward block and mean pooling over the group, giving one fixed-size
/// encoding per group regardless of the token count.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, AttentionSpec spec, bool zero_output, Rng& rng);

  /// tokens: (G·T) × input_width, group-major. Returns G × output_width.
  Var forward(const Var& tokens, Eigen::Index tokens_per_group) const;
  const AttentionSpec& spec() const { return spec_; }
  void collect(std::vector<Parameter*>& out);

 private:
  AttentionSpec spec_;
  Linear query_, key_, value_, project_, ff_hidden_, ff_out_;
};

/// Number of sin/cos frequency pairs used for time.
inline constexpr int kTimeBands = 4;

/// [sin(2^k π t), cos(2^k π t)] for k = 0..bands-1, interleaved.
Eigen::RowVectorXd positional_encoding(double t, int bands = kTimeBands);

}  // namespace trj::nn
