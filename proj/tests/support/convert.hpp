#pragma once

#include <vector>

#include "lipbench/core/tensor.hpp"
#include "support/oracles.hpp"

namespace lipbench::testing {

inline Tensor to_tensor(const oracle::Mat& m, bool requires_grad = false) {
  std::vector<double> flat;
  for (const auto& r : m) flat.insert(flat.end(), r.begin(), r.end());
  return Tensor::from_values({static_cast<Index>(m.size()), static_cast<Index>(m[0].size())}, flat, requires_grad);
}

inline Tensor to_tensor3(const std::vector<oracle::Mat>& w, bool requires_grad = false) {
  std::vector<double> flat;
  for (const auto& a : w)
    for (const auto& r : a) flat.insert(flat.end(), r.begin(), r.end());
  return Tensor::from_values({static_cast<Index>(w.size()), static_cast<Index>(w[0].size()),
                              static_cast<Index>(w[0][0].size())},
                             flat, requires_grad);
}

inline oracle::Mat to_mat(const Tensor& t) {
  auto m = t.matrix();
  oracle::Mat out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

inline double max_abs_diff(const oracle::Mat& a, const oracle::Mat& b) {
  double d = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a[r].size(); ++c) d = std::max(d, std::abs(a[r][c] - b[r][c]));
  return d;
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0, bool requires_grad = false) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::VectorXd v(shape_numel(shape));
  for (Index i = 0; i < v.size(); ++i) v[i] = n(rng);
  return Tensor::from_vector(std::move(shape), std::move(v), requires_grad);
}

}  // namespace lipbench::testing
