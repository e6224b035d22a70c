#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lipbench/core/ops.hpp"
#include "lipbench/models/model.hpp"
#include "support/convert.hpp"
#include "support/gradcheck.hpp"

namespace lipbench::testing {

struct NamedCheck {
  std::string name;
  GradCheckResult result;
};

/// Central-difference checks of every differentiable core op on one random draw.
inline std::vector<NamedCheck> op_gradient_checks(std::uint64_t seed) {
  std::vector<NamedCheck> out;
  std::mt19937_64 rng(1000 + seed);
  Tensor x = random_tensor({3, 7}, rng, 1.0, true);
  Tensor x4 = random_tensor({2, 3, 5}, rng, 1.0, true);
  Tensor w = random_tensor({2, 3, 3}, rng, 0.5, true);
  Tensor b = random_tensor({2}, rng, 0.5, true);
  Tensor wl = random_tensor({4, 3}, rng, 0.5, true);
  Tensor bl = random_tensor({4}, rng, 0.5, true);
  Tensor slope = random_tensor({3}, rng, 0.3, true);
  Tensor gamma = random_tensor({3}, rng, 0.5, true);
  Tensor beta = random_tensor({3}, rng, 0.5, true);
  Tensor gate = random_tensor({3, 2}, rng, 1.0, true);
  Tensor probe = random_tensor({2, 7}, rng);
  Tensor probe3 = random_tensor({3, 7}, rng);
  SequenceLayout layout({3, 4});

  auto weighted = [](const Tensor& t, const Tensor& p) { return sum(mul(t, p)); };
  auto check = [&](const char* name, const std::function<Tensor()>& f, std::vector<Tensor> ps) {
    out.push_back({name, grad_check(f, ps)});
  };

  check("conv1d", [&] { return weighted(conv1d_same(x, w, b, 2, &layout), probe); }, {x, w, b});
  check("conv1d_valid", [&] {
    return sum(mul(conv1d(x, w, b, 2, 0), conv1d(x, w, b, 2, 0)));
  }, {x, w, b});
  check("affine", [&] { return sum(tanh(affine(wl, x, bl))); }, {wl, x, bl});
  check("prelu", [&] { return weighted(prelu(x, slope), probe3); }, {x, slope});
  check("relu", [&] { return weighted(relu(x), probe3); }, {x});
  check("sigmoid", [&] { return weighted(sigmoid(x), probe3); }, {x});
  check("softmax_rows", [&] { return weighted(softmax(x, 1), probe3); }, {x});
  check("softmax_cols", [&] { return weighted(softmax(x, 0), probe3); }, {x});
  check("log_softmax", [&] { return weighted(log_softmax(x), probe3); }, {x});
  check("batch_norm_train", [&] {
    BatchNormBuffers buf{Tensor::zeros({3}), Tensor::full({3}, 1.0)};
    return weighted(batch_norm(x, gamma, beta, buf, Mode::train), probe3);
  }, {x, gamma, beta});
  check("batch_norm_eval", [&] {
    BatchNormBuffers buf{Tensor::full({3}, 0.2), Tensor::full({3}, 1.7)};
    return weighted(batch_norm(x, gamma, beta, buf, Mode::eval), probe3);
  }, {x, gamma, beta});
  check("batch_norm1d", [&] {
    BatchNormBuffers buf{Tensor::zeros({3}), Tensor::full({3}, 1.0)};
    return sum(mul(batch_norm1d(x4, gamma, beta, buf, Mode::train), sigmoid(x4)));
  }, {x4, gamma, beta});
  check("segment_mean", [&] { return sum(tanh(segment_mean(x, layout))); }, {x});
  check("scale_segments", [&] { return weighted(scale_segments(x, gate, layout), probe3); }, {x, gate});
  check("transpose_concat_slice", [&] {
    std::vector<Tensor> parts{x, slice_rows(x, 1, 2)};
    return sum(tanh(transpose(concat_rows(parts))));
  }, {x});
  check("matmul", [&] { return sum(tanh(matmul(wl, x))); }, {wl, x});
  check("dropout", [&] {
    Rng r(seed);
    return weighted(dropout(x, 0.3, Mode::train, r), probe3);
  }, {x});
  std::vector<int> targets{0, 2, 1};
  Tensor logits = random_tensor({3, 4}, rng, 1.0, true);
  Tensor teacher = random_tensor({3, 4}, rng, 1.0);
  MatrixRM soft = softmax(random_tensor({3, 4}, rng), 1).matrix();
  check("cross_entropy", [&] { return cross_entropy(logits, targets); }, {logits});
  check("cross_entropy_soft", [&] { return cross_entropy(logits, soft); }, {logits});
  check("kl_t_s", [&] { return kl_divergence(logits, teacher, 2.0); }, {logits});
  check("kl_s_t", [&] { return kl_divergence(logits, teacher, 1.5, KLDirection::student_to_teacher); }, {logits});

  Tensor frames = random_tensor({2, 2, 5, 5}, rng, 1.0, true);
  Tensor kw = random_tensor({3, 2, 3, 3}, rng, 0.5, true);
  Tensor kb = random_tensor({3}, rng, 0.5, true);
  Tensor probe2d = random_tensor({2, 3, 3, 3}, rng);
  check("conv2d", [&] { return weighted(conv2d(frames, kw, kb, 2, 1), probe2d); }, {frames, kw, kb});

  const Index hidden = 2;
  Tensor wih = random_tensor({3 * hidden, 3}, rng, 0.7, true);
  Tensor whh = random_tensor({3 * hidden, hidden}, rng, 0.7, true);
  Tensor bih = random_tensor({3 * hidden}, rng, 0.3, true);
  Tensor bhh = random_tensor({3 * hidden}, rng, 0.3, true);
  Tensor probe_h = random_tensor({hidden, 7}, rng);
  for (bool rev : {false, true}) {
    check(rev ? "gru_reverse" : "gru_forward",
          [&] { return weighted(gru_sequence(x, layout, wih, whh, bih, bhh, rev), probe_h); },
          {x, wih, whh, bih, bhh});
  }
  return out;
}

/// Small model of each architecture for whole-network checks.
inline models::ModelSpec tiny_model_spec(models::Architecture a) {
  models::ModelSpec s;
  s.architecture = a;
  s.encoder = {8, 8, 2, 3, 5};
  s.dctcn.growth_rate = 2;
  s.dctcn.block_output = 6;
  s.mstcn.channels = 6;
  s.mstcn.num_blocks = 2;
  s.bgru.num_layers = 2;
  s.bgru.hidden = 3;
  s.num_classes = 3;
  return s;
}

/// Cross-entropy of a freshly initialised model on a 2-clip packed batch, in
/// train mode with a dropout mask redrawn from the same seed on every call.
/// Every `stride`-th coordinate of every trainable tensor is checked.
inline NamedCheck model_gradient_check(models::Architecture a, std::uint64_t seed, long stride = 7) {
  const models::ModelSpec spec = tiny_model_spec(a);
  models::Model model(spec, seed);
  std::mt19937_64 rng(seed * 7919 + 17);
  const SequenceLayout layout({4, 3});
  models::ModelInput input{random_tensor({7, 8, 8}, rng), Tensor::zeros({1, 7}), layout};
  for (Index t : {1, 2, 5}) input.boundary.data()[t] = 1.0;
  const std::vector<int> targets{static_cast<int>(seed % 3), static_cast<int>((seed + 1) % 3)};
  auto loss = [&] {
    Rng drop(seed);
    return cross_entropy(model.forward(input, models::ForwardContext{Mode::train, &drop}), targets);
  };
  return {models::to_string(a), grad_check(loss, model.parameters(), 1e-5, stride)};
}

}  // namespace lipbench::testing
