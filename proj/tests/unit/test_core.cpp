#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "lipbench/core/errors.hpp"
#include "lipbench/core/ops.hpp"
#include "lipbench/core/optim.hpp"
#include "support/convert.hpp"
#include "support/gradcheck.hpp"
#include "support/gradient_suite.hpp"
#include "support/oracles.hpp"

using namespace lipbench;
using lipbench::testing::grad_check;
using lipbench::testing::max_abs_diff;
using lipbench::testing::random_tensor;
using lipbench::testing::to_mat;
using lipbench::testing::to_tensor;
using lipbench::testing::to_tensor3;

namespace {

std::vector<oracle::Mat> random_kernel(std::size_t c_out, std::size_t c_in, std::size_t k, std::mt19937_64& rng) {
  std::vector<oracle::Mat> w;
  for (std::size_t c = 0; c < c_out; ++c) w.push_back(oracle::random_matrix(c_in, k, rng));
  return w;
}

}  // namespace

TEST_CASE("conv1d: zero input yields the bias on every channel") {
  std::mt19937_64 rng(1);
  Tensor x = Tensor::zeros({3, 9});
  Tensor w = random_tensor({4, 3, 5}, rng);
  Tensor b = Tensor::from_values({4}, {0.5, -1.0, 2.0, 3.25});
  Tensor y = conv1d_same(x, w, b, 2);
  REQUIRE(y.shape() == Shape{4, 9});
  for (Index c = 0; c < 4; ++c)
    for (Index t = 0; t < 9; ++t) CHECK(y.at({c, t}) == b.value()[c]);
}

TEST_CASE("conv1d: identity kernel reproduces the input") {
  std::mt19937_64 rng(2);
  Tensor x = random_tensor({3, 6}, rng);
  Tensor w = Tensor::zeros({3, 3, 1});
  for (Index c = 0; c < 3; ++c) w.value()[c * 3 + c] = 1.0;
  Tensor y = conv1d(x, w, Tensor::zeros({3}), 1, 0);
  CHECK((y.value() - x.value()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("conv1d: matches the direct-summation oracle") {
  std::mt19937_64 rng(3);
  auto x = oracle::random_matrix(2, 7, rng);
  auto w = random_kernel(3, 2, 3, rng);
  std::vector<double> b{0.1, -0.2, 0.3};
  Tensor y = conv1d_same(to_tensor(x), to_tensor3(w), Tensor::from_values({3}, b), 2);
  CHECK(max_abs_diff(to_mat(y), oracle::conv1d(x, w, b, 2, 2)) < 1e-12);
}

TEST_CASE("conv1d: oracle agreement over the kernel x dilation grid") {
  std::mt19937_64 rng(4);
  for (long k : {1, 3, 5, 7})
    for (long d : {1, 2, 5}) {
      auto x = oracle::random_matrix(3, 11, rng);
      auto w = random_kernel(2, 3, static_cast<std::size_t>(k), rng);
      std::vector<double> b{0.7, -0.4};
      const long pad = d * (k - 1) / 2;
      Tensor y = conv1d(to_tensor(x), to_tensor3(w), Tensor::from_values({2}, b), d, pad);
      CHECK_MESSAGE(max_abs_diff(to_mat(y), oracle::conv1d(x, w, b, d, pad)) < 1e-12, "k=" << k << " d=" << d);
    }
}

TEST_CASE("conv1d: packed sequences never see each other") {
  std::mt19937_64 rng(5);
  auto a = oracle::random_matrix(2, 4, rng);
  auto b = oracle::random_matrix(2, 6, rng);
  auto w = random_kernel(3, 2, 5, rng);
  std::vector<double> bias{0.0, 1.0, -1.0};
  oracle::Mat packed = a;
  for (std::size_t i = 0; i < 2; ++i) packed[i].insert(packed[i].end(), b[i].begin(), b[i].end());
  SequenceLayout layout({4, 6});
  Tensor y = conv1d_same(to_tensor(packed), to_tensor3(w), Tensor::from_values({3}, bias), 2, &layout);
  auto ya = oracle::conv1d(a, w, bias, 2, 4);
  auto yb = oracle::conv1d(b, w, bias, 2, 4);
  auto got = to_mat(y);
  double err = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t t = 0; t < 4; ++t) err = std::max(err, std::abs(got[c][t] - ya[c][t]));
    for (std::size_t t = 0; t < 6; ++t) err = std::max(err, std::abs(got[c][4 + t] - yb[c][t]));
  }
  CHECK(err < 1e-12);
}

TEST_CASE("conv1d: configuration errors") {
  Tensor x = Tensor::zeros({2, 5});
  CHECK_THROWS_AS(conv1d_same(x, Tensor::zeros({1, 3, 3}), Tensor(), 1), ConfigError);
  CHECK_THROWS_AS(conv1d_same(x, Tensor::zeros({1, 2, 4}), Tensor(), 1), ConfigError);
  CHECK_THROWS_AS(conv1d(x, Tensor::zeros({1, 2, 3}), Tensor(), 0, 1), ConfigError);
}

TEST_CASE("batch_norm1d: constant channels collapse to the shift") {
  Tensor x = Tensor::zeros({2, 2, 4});
  for (Index i = 0; i < 16; ++i) x.value()[i] = ((i / 4) % 2 == 0) ? 3.0 : -7.0;
  Tensor gamma = Tensor::full({2}, 1.0), beta = Tensor::from_values({2}, {0.25, -0.5});
  BatchNormBuffers buffers{Tensor::zeros({2}), Tensor::full({2}, 1.0)};
  Tensor y = batch_norm1d(x, gamma, beta, buffers, Mode::train);
  for (Index n = 0; n < 2; ++n)
    for (Index c = 0; c < 2; ++c)
      for (Index t = 0; t < 4; ++t) CHECK(std::abs(y.at({n, c, t}) - beta.value()[c]) < 1e-3);
}

TEST_CASE("batch_norm1d: standardized input passes through") {
  // Per channel over (N, T): values {-1, 1} repeated have mean 0 and variance 1.
  Tensor x = Tensor::zeros({2, 1, 2});
  x.value() << -1.0, 1.0, 1.0, -1.0;
  Tensor gamma = Tensor::full({1}, 1.0), beta = Tensor::zeros({1});
  BatchNormBuffers buffers{Tensor::zeros({1}), Tensor::full({1}, 1.0)};
  Tensor y = batch_norm1d(x, gamma, beta, buffers, Mode::train);
  CHECK((y.value() - x.value()).cwiseAbs().maxCoeff() < 1e-5 * 1.0 + 1e-6);
}

TEST_CASE("batch_norm1d: train-mode moments per channel") {
  std::mt19937_64 rng(6);
  Tensor x = random_tensor({4, 3, 5}, rng, 2.0);
  for (Index i = 0; i < x.numel(); ++i) x.value()[i] += 3.0;
  BatchNormBuffers buffers{Tensor::zeros({3}), Tensor::full({3}, 1.0), 0.1, 1e-12};
  Tensor y = batch_norm1d(x, Tensor::full({3}, 1.0), Tensor::zeros({3}), buffers, Mode::train);
  for (Index c = 0; c < 3; ++c) {
    double m = 0.0, v = 0.0;
    for (Index n = 0; n < 4; ++n)
      for (Index t = 0; t < 5; ++t) m += y.at({n, c, t});
    m /= 20.0;
    for (Index n = 0; n < 4; ++n)
      for (Index t = 0; t < 5; ++t) v += (y.at({n, c, t}) - m) * (y.at({n, c, t}) - m);
    v /= 20.0;
    CHECK(std::abs(m) < 1e-10);
    CHECK(v >= 1.0 - 1e-6);
    CHECK(v <= 1.0 + 1e-6);
  }
}

TEST_CASE("batch_norm: eval before any training uses the initial stats") {
  Tensor x = Tensor::from_values({2, 2}, {1.0, 2.0, 3.0, 4.0});
  BatchNormBuffers buffers{Tensor::zeros({2}), Tensor::full({2}, 1.0)};
  Tensor y = batch_norm(x, Tensor::full({2}, 1.0), Tensor::zeros({2}), buffers, Mode::eval);
  const double s = 1.0 / std::sqrt(1.0 + 1e-5);
  for (Index i = 0; i < 4; ++i) CHECK(y.value()[i] == doctest::Approx(x.value()[i] * s).epsilon(1e-14));
  CHECK_THROWS_AS(batch_norm(Tensor::zeros({3, 2}), Tensor::full({2}, 1.0), Tensor::zeros({2}), buffers, Mode::eval),
                  ConfigError);
}

TEST_CASE("activations: analytic values") {
  Tensor c = Tensor::full({2, 8}, 0.7);
  Tensor p = softmax(c, 1);
  for (double v : p.data()) CHECK(v == doctest::Approx(1.0 / 8.0).epsilon(1e-15));
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  std::mt19937_64 rng(7);
  Tensor x = random_tensor({3, 4}, rng);
  Rng r(1);
  CHECK(dropout(x, 0.0, Mode::train, r).value() == x.value());
  CHECK(dropout(x, 0.0, Mode::eval, r).value() == x.value());
  CHECK(dropout(x, 0.5, Mode::eval, r).value() == x.value());
  CHECK_THROWS_AS(dropout(x, 1.0, Mode::train, r), ConfigError);
}

TEST_CASE("dropout: seeded masks reproduce and survivors are rescaled") {
  Tensor x = Tensor::full({50, 40}, 1.0);
  Rng a(99), b(99);
  Tensor ya = dropout(x, 0.2, Mode::train, a);
  Tensor yb = dropout(x, 0.2, Mode::train, b);
  CHECK(ya.value() == yb.value());
  long zeros = 0;
  for (double v : ya.data()) {
    if (v == 0.0) ++zeros;
    else CHECK(v == doctest::Approx(1.25).epsilon(1e-15));
  }
  CHECK(zeros > 300);
  CHECK(zeros < 500);
}

TEST_CASE("softmax rows sum to one, cross entropy and KL are non-negative") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor logits = random_tensor({4, 6}, rng, 5.0);
    Tensor teacher = random_tensor({4, 6}, rng, 5.0);
    Tensor p = softmax(logits, 1);
    for (Index r = 0; r < 4; ++r) CHECK(std::abs(p.matrix().row(r).sum() - 1.0) < 1e-12);
    Tensor pc = softmax(logits, 0);
    for (Index c = 0; c < 6; ++c) CHECK(std::abs(pc.matrix().col(c).sum() - 1.0) < 1e-12);
    std::vector<int> t{0, 5, 2, 3};
    CHECK(cross_entropy(logits, t).item() >= 0.0);
    CHECK(kl_divergence(logits, teacher).item() >= 0.0);
    CHECK(kl_divergence(logits, teacher, 1.0, KLDirection::student_to_teacher).item() >= 0.0);
  }
}

TEST_CASE("global_avg_pool_time") {
  CHECK(global_avg_pool_time(Tensor::from_values({1, 3}, {1, 2, 3})).item() == 2.0);
  Tensor c = Tensor::full({2, 5}, -1.5);
  Tensor m = global_avg_pool_time(c);
  CHECK(m.shape() == Shape{2});
  CHECK(m.value()[0] == -1.5);
  CHECK(m.value()[1] == -1.5);
  std::mt19937_64 rng(9);
  auto x = oracle::random_matrix(4, 9, rng);
  Tensor pooled = global_avg_pool_time(to_tensor(x));
  for (std::size_t c2 = 0; c2 < 4; ++c2) {
    double s = 0.0;
    for (double v : x[c2]) s += v;
    CHECK(std::abs(pooled.value()[static_cast<Index>(c2)] - s / 9.0) < 1e-15);
  }
}

TEST_CASE("cross_entropy: uniform logits, one-hot equivalence, log-sum-exp oracle") {
  Tensor uniform = Tensor::zeros({1, 500});
  std::vector<int> t{123};
  CHECK(cross_entropy(uniform, t).item() == doctest::Approx(std::log(500.0)).epsilon(1e-14));
  CHECK(std::abs(cross_entropy(uniform, t).item() - 6.2146) < 1e-4);

  std::mt19937_64 rng(10);
  auto logits = oracle::random_matrix(3, 5, rng, 3.0);
  std::vector<int> targets{4, 0, 2};
  MatrixRM onehot = MatrixRM::Zero(3, 5);
  for (int i = 0; i < 3; ++i) onehot(i, targets[static_cast<std::size_t>(i)]) = 1.0;
  Tensor lt = to_tensor(logits);
  CHECK(std::abs(cross_entropy(lt, targets).item() - cross_entropy(lt, onehot).item()) < 1e-12);
  CHECK(std::abs(cross_entropy(lt, targets).item() - oracle::cross_entropy(logits, targets)) < 1e-10);

  std::vector<int> bad{0, 5, 1};
  CHECK_THROWS_AS(cross_entropy(lt, bad), InputError);
}

TEST_CASE("kl_divergence: identities and oracle") {
  std::mt19937_64 rng(11);
  Tensor s = random_tensor({3, 4}, rng);
  CHECK(std::abs(kl_divergence(s, s).item()) < 1e-12);
  Tensor uniform = Tensor::zeros({2, 4});
  Tensor shifted = Tensor::full({2, 4}, 3.0);
  CHECK(std::abs(kl_divergence(shifted, uniform).item()) < 1e-12);
  auto a = oracle::random_matrix(2, 4, rng);
  auto b = oracle::random_matrix(2, 4, rng);
  CHECK(std::abs(kl_divergence(to_tensor(a), to_tensor(b)).item() - oracle::kl_teacher_student(a, b)) < 1e-10);
  CHECK(std::abs(kl_divergence(to_tensor(a), to_tensor(b), 1.0, KLDirection::student_to_teacher).item() -
                 oracle::kl_teacher_student(b, a)) < 1e-10);
}

TEST_CASE("kl_divergence: no gradient reaches the teacher") {
  std::mt19937_64 rng(12);
  Tensor s = random_tensor({2, 3}, rng, 1.0, true);
  Tensor t = random_tensor({2, 3}, rng, 1.0, true);
  backward(kl_divergence(s, t));
  CHECK(s.has_grad());
  CHECK_FALSE(t.has_grad());
}

TEST_CASE("backward: analytic examples") {
  Tensor x = Tensor::from_values({3}, {1, 2, 3}, true);
  backward(sum(x));
  for (double g : x.grad()) CHECK(g == 1.0);

  Tensor y = Tensor::scalar(3.0, true);
  backward(mul(y, y));
  CHECK(y.grad()[0] == 6.0);

  CHECK_THROWS_AS(backward(x * x), UsageError);
}

TEST_CASE("backward: a tensor with two consumers receives both contributions") {
  std::mt19937_64 rng(13);
  Tensor x = random_tensor({4}, rng, 1.0, true);
  Tensor a = Tensor::from_values({4}, {1, 2, 3, 4});
  Tensor b = Tensor::from_values({4}, {-2, 0.5, 1, 3});
  backward(add(sum(mul(x, a)), sum(mul(x, b))));
  Eigen::VectorXd shared = x.grad();

  Tensor x2 = x.detach();
  x2.set_requires_grad(true);
  backward(sum(mul(x2, add(a, b))));
  CHECK((shared - x2.grad()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((shared - (a.value() + b.value())).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("backward: visits nodes in reverse creation order") {
  std::vector<int> order;
  Tensor x = Tensor::scalar(1.0, true);
  auto tag = [&order](const Tensor& in, int id) {
    return detail::make_result(in.shape(), in.value(), {in}, [&order, id](detail::Node& self) {
      order.push_back(id);
      self.parents[0]->grad_buffer() += self.grad;
    });
  };
  Tensor a = tag(x, 1);
  Tensor b = tag(x, 2);
  Tensor c = tag(add(a, b), 3);
  backward(c);
  REQUIRE(order.size() == 3);
  CHECK(order == std::vector<int>{3, 2, 1});
}

TEST_CASE("adamw: constant gradient step tends to lr in the -sign(g) direction") {
  Tensor p = Tensor::from_values({2}, {0.0, 0.0}, true);
  AdamW opt({p}, {.lr = 0.01, .weight_decay = 0.0});
  Eigen::VectorXd before = p.value();
  for (int i = 0; i < 200; ++i) {
    p.grad() << 2.5, -0.3;
    before = p.value();
    opt.step();
  }
  Eigen::VectorXd delta = p.value() - before;
  CHECK(delta[0] < 0.0);
  CHECK(delta[1] > 0.0);
  CHECK(std::abs(std::abs(delta[0]) - 0.01) < 1e-6);
  CHECK(std::abs(std::abs(delta[1]) - 0.01) < 1e-6);
}

TEST_CASE("adamw: zero gradient is pure decoupled decay") {
  Tensor p = Tensor::from_values({2}, {1.5, -2.0}, true);
  AdamW opt({p}, {.lr = 0.1, .weight_decay = 0.2});
  for (int i = 0; i < 5; ++i) {
    p.zero_grad();
    opt.step();
  }
  const double factor = std::pow(1.0 - 0.1 * 0.2, 5);
  CHECK(std::abs(p.value()[0] - 1.5 * factor) < 1e-15);
  CHECK(std::abs(p.value()[1] + 2.0 * factor) < 1e-15);
}

TEST_CASE("adamw: three steps match a scalar reference implementation") {
  // loss = (p0 - 1)^2 + 3 p1^2
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.01;
  double ref[2] = {0.3, -0.7}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 3; ++t) {
    const double g[2] = {2.0 * (ref[0] - 1.0), 6.0 * ref[1]};
    for (int i = 0; i < 2; ++i) {
      ref[i] -= lr * wd * ref[i];
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, t));
      const double vh = v[i] / (1 - std::pow(b2, t));
      ref[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }

  Tensor p = Tensor::from_values({2}, {0.3, -0.7}, true);
  AdamW opt({p}, {.lr = lr, .beta1 = b1, .beta2 = b2, .eps = eps, .weight_decay = wd});
  for (int t = 0; t < 3; ++t) {
    opt.zero_grad();
    Tensor one = Tensor::from_values({1}, {1.0});
    Tensor d0 = sub(slice_rows(p, 0, 1), one);
    Tensor p1 = slice_rows(p, 1, 1);
    backward(add(mul(d0, d0), scale(mul(p1, p1), 3.0)));
    opt.step();
  }
  CHECK(std::abs(p.value()[0] - ref[0]) < 1e-12);
  CHECK(std::abs(p.value()[1] - ref[1]) < 1e-12);
}

TEST_CASE("cosine_lr: endpoints and midpoint") {
  CHECK(cosine_lr(0, 100, 3e-4) == 3e-4);
  CHECK(cosine_lr(100, 100, 3e-4) == 0.0);
  CHECK(cosine_lr(50, 100, 3e-4) == doctest::Approx(1.5e-4).epsilon(1e-12));
  CHECK(cosine_lr(99, 100, 1.0) < 1e-3);
  CHECK_THROWS_AS(cosine_lr(0, 0, 1.0), ConfigError);
}

TEST_CASE("gradient check: every core op against central differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    for (const auto& c : lipbench::testing::op_gradient_checks(seed)) {
      CHECK_MESSAGE(c.result.max_relative_error < 1e-4, c.name << " seed=" << seed << " err=" << c.result.max_relative_error
                                                                << " a=" << c.result.worst_analytic
                                                                << " n=" << c.result.worst_numeric);
    }
}
