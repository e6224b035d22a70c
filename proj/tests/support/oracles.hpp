#pragma once

// Independent reference implementations used only by tests. They are
// written with plain loops over std::vector and never call library ops.

#include <cmath>
#include <random>
#include <vector>

namespace lipbench::oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat m(rows, std::vector<double>(cols));
  for (auto& r : m)
    for (auto& v : r) v = n(rng);
  return m;
}

/// out[c][t] = b[c] + sum_{i,j} x[i][t + j*d - p] * w[c][i][j]
inline Mat conv1d(const Mat& x, const std::vector<Mat>& w, const std::vector<double>& b, long d, long p) {
  const long c_in = static_cast<long>(x.size());
  const long t_in = static_cast<long>(x[0].size());
  const long c_out = static_cast<long>(w.size());
  const long k = static_cast<long>(w[0][0].size());
  const long t_out = t_in + 2 * p - d * (k - 1);
  Mat out(static_cast<std::size_t>(c_out), std::vector<double>(static_cast<std::size_t>(t_out), 0.0));
  for (long c = 0; c < c_out; ++c)
    for (long t = 0; t < t_out; ++t) {
      double acc = b.empty() ? 0.0 : b[static_cast<std::size_t>(c)];
      for (long i = 0; i < c_in; ++i)
        for (long j = 0; j < k; ++j) {
          const long src = t + j * d - p;
          if (src >= 0 && src < t_in) acc += x[i][src] * w[c][i][j];
        }
      out[c][t] = acc;
    }
  return out;
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// SE: g = sigmoid(W2 relu(W1 mean_t(x))); out = x * g.
inline Mat squeeze_excite(const Mat& x, const Mat& w1, const Mat& w2, std::vector<double>* gate_out = nullptr) {
  const std::size_t c = x.size(), t = x[0].size();
  std::vector<double> squeezed(c, 0.0);
  for (std::size_t i = 0; i < c; ++i) {
    for (double v : x[i]) squeezed[i] += v;
    squeezed[i] /= static_cast<double>(t);
  }
  std::vector<double> hidden(w1.size(), 0.0);
  for (std::size_t r = 0; r < w1.size(); ++r) {
    for (std::size_t i = 0; i < c; ++i) hidden[r] += w1[r][i] * squeezed[i];
    hidden[r] = std::max(0.0, hidden[r]);
  }
  std::vector<double> gate(c, 0.0);
  for (std::size_t i = 0; i < c; ++i) {
    double a = 0.0;
    for (std::size_t r = 0; r < hidden.size(); ++r) a += w2[i][r] * hidden[r];
    gate[i] = sigmoid(a);
  }
  Mat out = x;
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t s = 0; s < t; ++s) out[i][s] *= gate[i];
  if (gate_out) *gate_out = gate;
  return out;
}

/// Hand-unrolled GRU recurrence (gate order r, z, n), one direction.
/// x[t] is the input column at step t; returns h[t] for every step in input order.
inline Mat gru(const Mat& xs_by_time, const Mat& w_ih, const Mat& w_hh, const std::vector<double>& b_ih,
               const std::vector<double>& b_hh, bool reverse) {
  const std::size_t steps = xs_by_time.size();
  const std::size_t hidden = w_hh[0].size();
  std::vector<double> h(hidden, 0.0);
  Mat out(steps, std::vector<double>(hidden, 0.0));
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    const auto& x = xs_by_time[t];
    auto row = [&](const Mat& w, const std::vector<double>& v, std::size_t r) {
      double acc = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) acc += w[r][i] * v[i];
      return acc;
    };
    std::vector<double> next(hidden);
    for (std::size_t u = 0; u < hidden; ++u) {
      const double r = sigmoid(row(w_ih, x, u) + b_ih[u] + row(w_hh, h, u) + b_hh[u]);
      const double z = sigmoid(row(w_ih, x, hidden + u) + b_ih[hidden + u] + row(w_hh, h, hidden + u) +
                               b_hh[hidden + u]);
      const double n = std::tanh(row(w_ih, x, 2 * hidden + u) + b_ih[2 * hidden + u] +
                                 r * (row(w_hh, h, 2 * hidden + u) + b_hh[2 * hidden + u]));
      next[u] = (1.0 - z) * n + z * h[u];
    }
    h = next;
    out[t] = h;
  }
  return out;
}

inline double log_sum_exp(const std::vector<double>& row) {
  double m = row[0];
  for (double v : row) m = std::max(m, v);
  double s = 0.0;
  for (double v : row) s += std::exp(v - m);
  return m + std::log(s);
}

inline std::vector<double> softmax(const std::vector<double>& row) {
  const double lse = log_sum_exp(row);
  std::vector<double> p(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) p[i] = std::exp(row[i] - lse);
  return p;
}

inline double cross_entropy(const Mat& logits, const std::vector<int>& targets) {
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) total += log_sum_exp(logits[i]) - logits[i][targets[i]];
  return total / static_cast<double>(logits.size());
}

/// mean over rows of sum_k p_t (log p_t - log p_s)
inline double kl_teacher_student(const Mat& student, const Mat& teacher) {
  double total = 0.0;
  for (std::size_t i = 0; i < student.size(); ++i) {
    const auto pt = softmax(teacher[i]);
    const double lse_t = log_sum_exp(teacher[i]);
    const double lse_s = log_sum_exp(student[i]);
    for (std::size_t k = 0; k < pt.size(); ++k) {
      total += pt[k] * ((teacher[i][k] - lse_t) - (student[i][k] - lse_s));
    }
  }
  return total / static_cast<double>(student.size());
}

inline std::vector<double> average_softmax(const std::vector<std::vector<double>>& logits_per_model) {
  std::vector<double> avg(logits_per_model[0].size(), 0.0);
  for (const auto& l : logits_per_model) {
    const auto p = softmax(l);
    for (std::size_t k = 0; k < p.size(); ++k) avg[k] += p[k];
  }
  for (double& v : avg) v /= static_cast<double>(logits_per_model.size());
  return avg;
}

}  // namespace lipbench::oracle
