#pragma once

#include "trj/common.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace trj::nn {

using Matrix = RowMatrix;

class ShapeError : public Error {
 public:
  using Error::Error;
};

std::string shape_string(Eigen::Index rows, Eigen::Index cols);

/// A trainable tensor living outside any tape. Gradients accumulate into `grad`
/// on every backward pass until cleared.
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Matrix value);

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }

 private:
  std::string name_;
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid until the tape is cleared.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode recording of dense matrix operations.
///
/// Nodes are appended in evaluation order, which is a topological order of the
/// graph, so `backward` walks the node list once in reverse.
class Tape {
 public:
  /// Receives dLoss/dOutput and pushes contributions to inputs through `accumulate`.
  using BackwardFn = std::function<void(Tape&, const Matrix& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  Var constant(Matrix value);
  Var parameter(Parameter& param);
  /// Records an operation output. `inputs` decide whether the node needs a gradient.
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn backward);

  const Matrix& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

  /// Adds `grad` into the gradient slot of `v` (no-op for constants).
  void accumulate(const Var& v, const Matrix& grad);
  template <typename Expr>
  void accumulate(const Var& v, const Eigen::MatrixBase<Expr>& grad) {
    if (!v.requires_grad()) return;
    Node& n = nodes_[static_cast<size_t>(v.id())];
    if (n.grad.size() == 0) {
      n.grad = grad;
    } else {
      n.grad += grad;
    }
  }

  /// Back-propagates from a 1×1 output.
  void backward(const Var& output);
  /// Back-propagates from an arbitrary output with an explicit seed gradient.
  void backward(const Var& output, const Matrix& seed);

  /// Gradient slot of a node after backward (empty if it never received one).
  const Matrix& grad(const Var& v) const { return nodes_[static_cast<size_t>(v.id())].grad; }

  void clear();
  size_t size() const { return nodes_.size(); }

  /// Nodes alive across all tapes in the process.
  static long live_nodes();

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  int push(Node node);

  std::vector<Node> nodes_;
};

// Operations. Every op checks shapes and reports both operands' shapes on mismatch.

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// Adds a 1×C row to every row of `a`.
Var add_row(const Var& a, const Var& row);
Var relu(const Var& a);
/// Row-wise softmax.
Var softmax_rows(const Var& a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
/// out.row(i) = a.row(index[i]); backward scatters and adds.
Var gather_rows(const Var& a, std::span<const int> index);
/// Mean over consecutive blocks of `group` rows: (G·group)×C → G×C.
Var segment_mean(const Var& a, Eigen::Index group);
/// Column-wise maximum over all rows: R×C → 1×C.
Var max_rows(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
/// Σ a² as a 1×1 node.
Var sum_squares(const Var& a);

/// Scaled dot-product attention evaluated independently per group and head.
/// q, k, v: (G·T)×(H·d). Tokens of group g occupy rows [g·T, (g+1)·T).
Var attention_core(const Var& q, const Var& k, const Var& v, Eigen::Index group, int heads);

/// Explicit Euler accumulation of per-step rates along time, independently per group.
///
/// rates: (G·S)×C, group-major; init: G×C. Output row s of group g is
/// init_g + h·Σ_{j≤s} rate_{g,j}. With `emit_initial`, every group's output is
/// prefixed by init_g itself, giving S+1 rows per group.
Var euler_accumulate(const Var& rates, const Var& init, Eigen::Index steps, double h, bool emit_initial);

}  // namespace trj::nn
