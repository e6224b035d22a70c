#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "lipbench/core/tensor.hpp"

namespace lipbench::testing {

struct GradCheckResult {
  double max_relative_error = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  long checked = 0;
};

/// Relative error with an absolute floor at the central-difference noise
/// level, so that gradients which are zero up to round-off do not dominate.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares analytic gradients of `loss` with respect to `params` against
/// central finite differences with step h. `stride` > 1 checks every
/// stride-th coordinate only.
inline GradCheckResult grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                                  double h = 1e-5, long stride = 1) {
  for (auto& p : params) p.zero_grad();
  Tensor l = loss();
  backward(l);
  std::vector<Eigen::VectorXd> analytic;
  for (auto& p : params) analytic.push_back(p.grad());

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Eigen::VectorXd& value = params[k].value();
    for (Index i = 0; i < value.size(); i += stride) {
      const double saved = value[i];
      double plus, minus;
      {
        NoGradGuard guard;
        value[i] = saved + h;
        plus = loss().item();
        value[i] = saved - h;
        minus = loss().item();
      }
      value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double err = relative_error(analytic[k][i], numeric);
      ++result.checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_analytic = analytic[k][i];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace lipbench::testing
