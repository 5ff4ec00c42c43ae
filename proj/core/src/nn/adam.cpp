#include "trj/nn/adam.hpp"

#include <cmath>

namespace trj::nn {

Adam::Adam(std::vector<Parameter*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Parameter* p : params_) {
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols()) p->zero_grad();
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

bool Adam::step() {
  for (Parameter* p : params_) {
    if (!p->grad.allFinite()) {
      ++skipped_;
      zero_grad();
      return false;
    }
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grad;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= config_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
  }
  zero_grad();
  return true;
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace trj::nn
