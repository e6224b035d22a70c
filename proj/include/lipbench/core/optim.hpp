#pragma once

#include <vector>

#include "lipbench/core/tensor.hpp"

namespace lipbench {

struct AdamWOptions {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

/// AdamW with decoupled weight decay: the decay term scales the parameter
/// directly (p -= lr * wd * p) before the bias-corrected Adam update.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWOptions options);

  /// One update using the gradients currently stored on the parameters.
  /// Parameters without a gradient buffer are treated as having zero gradient.
  void step(double lr);
  void step() { step(options_.lr); }
  void zero_grad();

  long steps_taken() const { return steps_; }
  const AdamWOptions& options() const { return options_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Eigen::VectorXd> first_moment_;
  std::vector<Eigen::VectorXd> second_moment_;
  AdamWOptions options_;
  long steps_ = 0;
};

/// lr0 * 0.5 * (1 + cos(pi * step / total_steps)); no warm-up.
double cosine_lr(long step, long total_steps, double lr0);

}  // namespace lipbench
