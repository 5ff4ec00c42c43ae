#include "trj/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace trj::nn {

namespace {

double evaluate(const std::function<Var(Tape&)>& loss) {
  Tape tape;
  const Var out = loss(tape);
  return out.value()(0, 0);
}

}  // namespace

GradCheckResult check_gradients(const std::function<Var(Tape&)>& loss, std::span<Parameter* const> params,
                                const GradCheckOptions& options) {
  for (Parameter* p : params) p->zero_grad();
  double loss_value = 0.0;
  {
    Tape tape;
    const Var out = loss(tape);
    loss_value = out.value()(0, 0);
    tape.backward(out);
  }
  const double floor = options.noise_floor * std::numeric_limits<double>::epsilon() *
                       std::max(1.0, std::abs(loss_value)) / options.step;

  Rng rng(options.seed);
  GradCheckResult result;
  for (Parameter* p : params) {
    const Eigen::Index n = p->value.size();
    std::vector<Eigen::Index> entries(static_cast<size_t>(n));
    std::iota(entries.begin(), entries.end(), 0);
    if (n > options.samples_per_parameter) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(static_cast<size_t>(options.samples_per_parameter));
    }
    Eigen::VectorXd analytic(static_cast<Eigen::Index>(entries.size()));
    Eigen::VectorXd numeric(static_cast<Eigen::Index>(entries.size()));
    for (size_t k = 0; k < entries.size(); ++k) {
      double& x = p->value.data()[entries[k]];
      const double saved = x;
      x = saved + options.step;
      const double up = evaluate(loss);
      x = saved - options.step;
      const double down = evaluate(loss);
      x = saved;
      numeric(static_cast<Eigen::Index>(k)) = (up - down) / (2.0 * options.step);
      analytic(static_cast<Eigen::Index>(k)) = p->grad.data()[entries[k]];
    }
    const double scale = std::max({analytic.norm(), numeric.norm(), floor});
    const double rel = (analytic - numeric).norm() / scale;
    result.entries_checked += static_cast<int>(entries.size());
    if (rel >= result.worst_relative_error) {
      result.worst_relative_error = rel;
      result.worst_parameter = p->name();
    }
  }
  return result;
}

}  // namespace trj::nn
