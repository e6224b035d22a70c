#include "lipbench/core/optim.hpp"

#include <cmath>
#include <numbers>

#include "lipbench/core/errors.hpp"

namespace lipbench {

AdamW::AdamW(std::vector<Tensor> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
  if (options_.beta1 < 0.0 || options_.beta1 >= 1.0 || options_.beta2 < 0.0 || options_.beta2 >= 1.0) {
    throw ConfigError("AdamW: betas must lie in [0, 1)");
  }
  if (options_.eps <= 0.0) throw ConfigError("AdamW: eps must be positive");
  if (options_.weight_decay < 0.0) throw ConfigError("AdamW: weight_decay must be non-negative");
  for (const auto& p : params_) {
    first_moment_.push_back(Eigen::VectorXd::Zero(p.numel()));
    second_moment_.push_back(Eigen::VectorXd::Zero(p.numel()));
  }
}

void AdamW::step(double lr) {
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    Eigen::VectorXd& value = p.value();
    if (options_.weight_decay != 0.0) value *= 1.0 - lr * options_.weight_decay;
    if (!p.has_grad()) {
      first_moment_[i] *= b1;
      second_moment_[i] *= b2;
    } else {
      const Eigen::VectorXd& g = p.grad();
      first_moment_[i] = b1 * first_moment_[i] + (1.0 - b1) * g;
      second_moment_[i] = b2 * second_moment_[i] + (1.0 - b2) * g.cwiseAbs2();
    }
    const auto m_hat = first_moment_[i].array() / correction1;
    const auto v_hat = second_moment_[i].array() / correction2;
    value.array() -= lr * m_hat / (v_hat.sqrt() + options_.eps);
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double cosine_lr(long step, long total_steps, double lr0) {
  if (total_steps <= 0) throw ConfigError("cosine_lr: total_steps must be positive");
  if (step < 0 || step > total_steps) throw UsageError("cosine_lr: step outside [0, total_steps]");
  if (step == total_steps) return 0.0;
  const double ratio = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * ratio));
}

}  // namespace lipbench
