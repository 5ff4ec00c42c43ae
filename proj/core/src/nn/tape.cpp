#include "trj/nn/tape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>

namespace trj::nn {

namespace {

std::atomic<long> g_live_nodes{0};

void require(bool ok, const char* op, const Var& a, const Var& b) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.rows(), a.cols()) + " and " +
                     shape_string(b.rows(), b.cols()));
  }
}

void require_same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw Error("operands live on different tapes");
}

}  // namespace

std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return "(" + std::to_string(rows) + " x " + std::to_string(cols) + ")";
}

Parameter::Parameter(std::string name, Matrix v) : value(std::move(v)), name_(std::move(name)) { zero_grad(); }

const Matrix& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Tape::~Tape() { clear(); }

int Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  g_live_nodes.fetch_add(1, std::memory_order_relaxed);
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return Var(this, push(std::move(n)));
}

Var Tape::parameter(Parameter& param) {
  Node n;
  n.value = param.value;
  n.param = &param;
  n.requires_grad = true;
  return Var(this, push(std::move(n)));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v.requires_grad(); });
  if (n.requires_grad) n.backward = std::move(backward);
  return Var(this, push(std::move(n)));
}

void Tape::accumulate(const Var& v, const Matrix& grad) { accumulate<Matrix>(v, grad); }

void Tape::backward(const Var& output) {
  if (output.rows() != 1 || output.cols() != 1) {
    throw ShapeError("backward without a seed needs a 1x1 output, got " + shape_string(output.rows(), output.cols()));
  }
  backward(output, Matrix::Ones(1, 1));
}

void Tape::backward(const Var& output, const Matrix& seed) {
  if (&output.tape() != this) throw Error("backward called on a foreign tape");
  if (seed.rows() != output.rows() || seed.cols() != output.cols()) {
    throw ShapeError("seed gradient " + shape_string(seed.rows(), seed.cols()) + " does not match output " +
                     shape_string(output.rows(), output.cols()));
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!output.requires_grad()) return;
  nodes_[static_cast<size_t>(output.id())].grad = seed;
  for (int i = output.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.param != nullptr) {
      if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) n.param->zero_grad();
      n.param->grad += n.grad;
    } else if (n.backward) {
      n.backward(*this, n.grad);
    }
  }
}

void Tape::clear() {
  g_live_nodes.fetch_sub(static_cast<long>(nodes_.size()), std::memory_order_relaxed);
  nodes_.clear();
}

long Tape::live_nodes() { return g_live_nodes.load(std::memory_order_relaxed); }

Var matmul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require(a.cols() == b.rows(), "matmul", a, b);
  Matrix out = a.value() * b.value();
  const Var in[] = {a, b};
  return a.tape().record(std::move(out), in, [a, b](Tape& t, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g * b.value().transpose());
    if (b.requires_grad()) t.accumulate(b, a.value().transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add", a, b);
  const Var in[] = {a, b};
  return a.tape().record(a.value() + b.value(), in, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub", a, b);
  const Var in[] = {a, b};
  return a.tape().record(a.value() - b.value(), in, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (b.requires_grad()) t.accumulate(b, -g);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul", a, b);
  const Var in[] = {a, b};
  return a.tape().record(a.value().cwiseProduct(b.value()), in, [a, b](Tape& t, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g.cwiseProduct(b.value()));
    if (b.requires_grad()) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale(const Var& a, double s) {
  const Var in[] = {a};
  return a.tape().record(a.value() * s, in, [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

Var add_row(const Var& a, const Var& row) {
  require_same_tape(a, row);
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row", a, row);
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  const Var in[] = {a, row};
  return a.tape().record(std::move(out), in, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (row.requires_grad()) t.accumulate(row, g.colwise().sum());
  });
}

Var relu(const Var& a) {
  const Var in[] = {a};
  return a.tape().record(a.value().cwiseMax(0.0), in, [a](Tape& t, const Matrix& g) {
    Matrix da = (a.value().array() > 0.0).select(g.array(), 0.0).matrix();
    t.accumulate(a, da);
  });
}

Var softmax_rows(const Var& a) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double m = a.value().row(r).maxCoeff();
    out.row(r) = (a.value().row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  const Var in[] = {a};
  return a.tape().record(out, in, [a, out](Tape& t, const Matrix& g) {
    const Eigen::VectorXd dots = g.cwiseProduct(out).rowwise().sum();
    Matrix da = out.cwiseProduct(g - dots.replicate(1, g.cols()));
    t.accumulate(a, da);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols", parts[0], p);
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(out), parts, [inputs](Tape& t, const Matrix& g) {
    Eigen::Index col = 0;
    for (const auto& p : inputs) {
      if (p.requires_grad()) t.accumulate(p, g.middleCols(col, p.cols()));
      col += p.cols();
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows", parts[0], p);
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(out), parts, [inputs](Tape& t, const Matrix& g) {
    Eigen::Index row = 0;
    for (const auto& p : inputs) {
      if (p.requires_grad()) t.accumulate(p, g.middleRows(row, p.rows()));
      row += p.rows();
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw ShapeError("slice_cols [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") out of range for " + shape_string(a.rows(), a.cols()));
  }
  const Var in[] = {a};
  return a.tape().record(a.value().middleCols(start, count), in, [a, start, count](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw ShapeError("slice_rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") out of range for " + shape_string(a.rows(), a.cols()));
  }
  const Var in[] = {a};
  return a.tape().record(a.value().middleRows(start, count), in, [a, start, count](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleRows(start, count) = g;
    t.accumulate(a, full);
  });
}

Var gather_rows(const Var& a, std::span<const int> index) {
  Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " out of range for " +
                       shape_string(a.rows(), a.cols()));
    }
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  auto idx = std::make_shared<std::vector<int>>(index.begin(), index.end());
  const Var in[] = {a};
  return a.tape().record(std::move(out), in, [a, idx](Tape& t, const Matrix& g) {
    Matrix da = Matrix::Zero(a.rows(), a.cols());
    for (size_t i = 0; i < idx->size(); ++i) da.row((*idx)[i]) += g.row(static_cast<Eigen::Index>(i));
    t.accumulate(a, da);
  });
}

Var segment_mean(const Var& a, Eigen::Index group) {
  if (group <= 0 || a.rows() % group != 0) {
    throw ShapeError("segment_mean: group " + std::to_string(group) + " does not divide " +
                     shape_string(a.rows(), a.cols()));
  }
  const Eigen::Index groups = a.rows() / group;
  Matrix out(groups, a.cols());
  for (Eigen::Index g = 0; g < groups; ++g) out.row(g) = a.value().middleRows(g * group, group).colwise().mean();
  const Var in[] = {a};
  return a.tape().record(std::move(out), in, [a, group, groups](Tape& t, const Matrix& g) {
    Matrix da(a.rows(), a.cols());
    const double inv = 1.0 / static_cast<double>(group);
    for (Eigen::Index k = 0; k < groups; ++k) da.middleRows(k * group, group) = (g.row(k) * inv).replicate(group, 1);
    t.accumulate(a, da);
  });
}

Var max_rows(const Var& a) {
  if (a.rows() == 0) throw ShapeError("max_rows: empty input");
  Matrix out(1, a.cols());
  std::vector<Eigen::Index> argmax(static_cast<size_t>(a.cols()));
  for (Eigen::Index c = 0; c < a.cols(); ++c) out(0, c) = a.value().col(c).maxCoeff(&argmax[static_cast<size_t>(c)]);
  const Var in[] = {a};
  return a.tape().record(std::move(out), in, [a, argmax](Tape& t, const Matrix& g) {
    Matrix da = Matrix::Zero(a.rows(), a.cols());
    for (Eigen::Index c = 0; c < a.cols(); ++c) da(argmax[static_cast<size_t>(c)], c) = g(0, c);
    t.accumulate(a, da);
  });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const Var in[] = {a};
  return a.tape().record(std::move(out), in, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean: empty input");
  return scale(sum(a), 1.0 / n);
}

Var sum_squares(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  const Var in[] = {a};
  return a.tape().record(std::move(out), in, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, a.value() * (2.0 * g(0, 0)));
  });
}

Var attention_core(const Var& q, const Var& k, const Var& v, Eigen::Index group, int heads) {
  require_same_tape(q, k);
  require_same_tape(q, v);
  require(q.rows() == k.rows() && q.cols() == k.cols(), "attention_core(q,k)", q, k);
  require(q.rows() == v.rows() && q.cols() == v.cols(), "attention_core(q,v)", q, v);
  if (group <= 0 || q.rows() % group != 0) {
    throw ShapeError("attention_core: group size " + std::to_string(group) + " does not divide " +
                     shape_string(q.rows(), q.cols()));
  }
  if (heads <= 0 || q.cols() % heads != 0) {
    throw ShapeError("attention_core: " + std::to_string(heads) + " heads do not divide " +
                     shape_string(q.rows(), q.cols()));
  }
  const Eigen::Index groups = q.rows() / group;
  const Eigen::Index d = q.cols() / heads;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));

  auto probs = std::make_shared<std::vector<Matrix>>(static_cast<size_t>(groups * heads));
  Matrix out(q.rows(), q.cols());
  for (Eigen::Index g = 0; g < groups; ++g) {
    for (int h = 0; h < heads; ++h) {
      const auto Q = q.value().block(g * group, h * d, group, d);
      const auto K = k.value().block(g * group, h * d, group, d);
      const auto V = v.value().block(g * group, h * d, group, d);
      Matrix S = (Q * K.transpose()) * s;
      for (Eigen::Index r = 0; r < group; ++r) {
        S.row(r) = (S.row(r).array() - S.row(r).maxCoeff()).exp();
        S.row(r) /= S.row(r).sum();
      }
      out.block(g * group, h * d, group, d).noalias() = S * V;
      (*probs)[static_cast<size_t>(g * heads + h)] = std::move(S);
    }
  }
  const Var in[] = {q, k, v};
  return q.tape().record(std::move(out), in, [q, k, v, group, groups, heads, d, s, probs](Tape& t, const Matrix& grad) {
    Matrix dq = Matrix::Zero(q.rows(), q.cols());
    Matrix dk = Matrix::Zero(k.rows(), k.cols());
    Matrix dv = Matrix::Zero(v.rows(), v.cols());
    for (Eigen::Index g = 0; g < groups; ++g) {
      for (int h = 0; h < heads; ++h) {
        const Matrix& P = (*probs)[static_cast<size_t>(g * heads + h)];
        const auto Q = q.value().block(g * group, h * d, group, d);
        const auto K = k.value().block(g * group, h * d, group, d);
        const auto V = v.value().block(g * group, h * d, group, d);
        const auto dO = grad.block(g * group, h * d, group, d);
        dv.block(g * group, h * d, group, d).noalias() = P.transpose() * dO;
        Matrix dP = dO * V.transpose();
        const Eigen::VectorXd dots = dP.cwiseProduct(P).rowwise().sum();
        Matrix dS = P.cwiseProduct(dP - dots.replicate(1, group)) * s;
        dq.block(g * group, h * d, group, d).noalias() = dS * K;
        dk.block(g * group, h * d, group, d).noalias() = dS.transpose() * Q;
      }
    }
    t.accumulate(q, dq);
    t.accumulate(k, dk);
    t.accumulate(v, dv);
  });
}

Var euler_accumulate(const Var& rates, const Var& init, Eigen::Index steps, double h, bool emit_initial) {
  require_same_tape(rates, init);
  require(rates.cols() == init.cols(), "euler_accumulate", rates, init);
  const Eigen::Index groups = init.rows();
  if (steps < 0 || rates.rows() != groups * steps) {
    throw ShapeError("euler_accumulate: rates " + shape_string(rates.rows(), rates.cols()) + " do not hold " +
                     std::to_string(steps) + " steps for " + std::to_string(groups) + " groups");
  }
  const Eigen::Index offset = emit_initial ? 1 : 0;
  const Eigen::Index per_group = steps + offset;
  if (per_group == 0) throw ShapeError("euler_accumulate: no output rows");
  Matrix out(groups * per_group, rates.cols());
  for (Eigen::Index g = 0; g < groups; ++g) {
    Eigen::RowVectorXd state = init.value().row(g);
    if (emit_initial) out.row(g * per_group) = state;
    for (Eigen::Index s = 0; s < steps; ++s) {
      state += h * rates.value().row(g * steps + s);
      out.row(g * per_group + offset + s) = state;
    }
  }
  const Var in[] = {rates, init};
  return rates.tape().record(std::move(out), in,
                             [rates, init, groups, steps, offset, per_group, h](Tape& t, const Matrix& grad) {
    Matrix drates(rates.rows(), rates.cols());
    Matrix dinit(groups, rates.cols());
    for (Eigen::Index g = 0; g < groups; ++g) {
      Eigen::RowVectorXd tail = Eigen::RowVectorXd::Zero(rates.cols());
      for (Eigen::Index s = steps - 1; s >= 0; --s) {
        tail += grad.row(g * per_group + offset + s);
        drates.row(g * steps + s) = h * tail;
      }
      if (offset) tail += grad.row(g * per_group);
      dinit.row(g) = tail;
    }
    t.accumulate(rates, drates);
    t.accumulate(init, dinit);
  });
}

}  // namespace trj::nn
