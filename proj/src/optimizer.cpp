#include "survfuse/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace survfuse {

double cosine_lr(double lr_max, int step, int total_steps) {
  if (total_steps < 1 || step < 0 || step >= total_steps) {
    throw std::invalid_argument("cosine_lr: step outside schedule");
  }
  if (total_steps == 1) return lr_max;
  const double phase = static_cast<double>(step) /
                       static_cast<double>(total_steps - 1);
  return lr_max * 0.5 * (1.0 + std::cos(M_PI * phase));
}

void AdamW::step(std::vector<Eigen::MatrixXd>& params,
                 const std::vector<Eigen::MatrixXd>& grads, double lr) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("AdamW: params/grads count mismatch");
  }
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = Eigen::MatrixXd::Zero(params[i].rows(), params[i].cols());
      v_[i] = Eigen::MatrixXd::Zero(params[i].rows(), params[i].cols());
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::MatrixXd g = grads[i];
    if (!cfg_.decoupled && cfg_.weight_decay > 0.0) {
      g += cfg_.weight_decay * params[i];
    }
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const Eigen::ArrayXXd mhat = m_[i].array() / bc1;
    const Eigen::ArrayXXd vhat = v_[i].array() / bc2;
    params[i].array() -= lr * mhat / (vhat.sqrt() + cfg_.eps);
    if (cfg_.decoupled && cfg_.weight_decay > 0.0) {
      params[i] -= lr * cfg_.weight_decay * params[i];
    }
  }
}

}  // namespace survfuse
