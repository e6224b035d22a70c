#pragma once

#include <span>
#include <vector>

#include "lipbench/core/random.hpp"
#include "lipbench/core/sequence.hpp"
#include "lipbench/core/tensor.hpp"

// Differentiable operations. Sequence tensors are channel-major [C, T];
// batches of sequences are packed along the time axis and described by a
// SequenceLayout so that temporal ops never mix neighbouring samples.

namespace lipbench {

enum class Mode { train, eval };

// ---- elementwise and reductions ------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& x);

// ---- shape ----------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x);
/// Concatenates rank-2 tensors [C_i, M] along the channel axis.
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, Index begin, Index count);
/// [N, C, T] -> [C, N, T]; the permutation is its own inverse.
Tensor swap_leading_axes(const Tensor& x);

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
/// weight [out, in] * x [in, M] + bias [out] broadcast over columns. bias may be undefined.
Tensor affine(const Tensor& weight, const Tensor& x, const Tensor& bias);

// ---- activations ----------------------------------------------------------

Tensor relu(const Tensor& x);
/// Per-channel parametric ReLU over the rows of a [C, M] tensor; slope has C entries.
Tensor prelu(const Tensor& x, const Tensor& slope);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
/// Softmax of a rank-2 tensor along `axis` (0 = down columns, 1 = along rows).
Tensor softmax(const Tensor& x, int axis = 1);
Tensor log_softmax(const Tensor& x);
/// Inverted dropout: survivors scaled by 1/(1-p). Identity in eval mode or when p == 0.
Tensor dropout(const Tensor& x, double p, Mode mode, Rng& rng);

// ---- convolution ----------------------------------------------------------

/// output[c, t] = bias[c] + sum_{i,j} input[i, t + j*dilation - padding] * weight[c, i, j],
/// with out-of-range (or other-sequence) taps reading zero.
/// With a multi-sequence layout the padding must be "same": dilation*(k-1)/2, k odd.
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, Index dilation,
              Index padding, const SequenceLayout* layout = nullptr);

/// Same-padding conv1d; rejects even kernels.
Tensor conv1d_same(const Tensor& input, const Tensor& weight, const Tensor& bias, Index dilation,
                   const SequenceLayout* layout = nullptr);

/// Per-frame 2-D convolution: input [F, C_in, H, W], weight [C_out, C_in, k, k].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, Index stride,
              Index padding);

// ---- normalisation and pooling -------------------------------------------

struct BatchNormBuffers {
  Tensor running_mean;  // [C]
  Tensor running_var;   // [C]
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Batch norm over the columns of a channel-major [C, M] tensor. Train mode
/// uses batch statistics (biased variance) and updates the running buffers
/// (unbiased variance); eval mode uses the running buffers only.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormBuffers& buffers, Mode mode);

/// Batch norm over (N, T) for an [N, C, T] input.
Tensor batch_norm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    BatchNormBuffers& buffers, Mode mode);

/// Mean over time of each packed sequence: [C, total] -> [C, count].
Tensor segment_mean(const Tensor& x, const SequenceLayout& layout);
/// x[c, t] * gate[c, sequence_of(t)]: [C, total] x [C, count] -> [C, total].
Tensor scale_segments(const Tensor& x, const Tensor& gate, const SequenceLayout& layout);
/// [C, T] -> [C].
Tensor global_avg_pool_time(const Tensor& x);

// ---- recurrent ------------------------------------------------------------

/// One direction of a GRU layer over packed sequences. Gate order (r, z, n):
///   r = sigma(W_ir x + b_ir + W_hr h + b_hr)
///   z = sigma(W_iz x + b_iz + W_hz h + b_hz)
///   n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
///   h' = (1 - z) * n + z * h,   h_0 = 0
/// x [C_in, total]; w_ih [3H, C_in]; w_hh [3H, H]; biases [3H]. Returns [H, total].
/// When `reverse` is set each sequence is scanned from its last frame.
Tensor gru_sequence(const Tensor& x, const SequenceLayout& layout, const Tensor& w_ih,
                    const Tensor& w_hh, const Tensor& b_ih, const Tensor& b_hh, bool reverse);

// ---- losses ---------------------------------------------------------------

/// Mean over rows of -log softmax(logits)[target]. logits [N, K].
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);
/// Mean over rows of -sum_k p_k log softmax(logits)_k; targets [N, K] rows sum to 1.
Tensor cross_entropy(const Tensor& logits, const MatrixRM& soft_targets);

enum class KLDirection {
  teacher_to_student,  // KL(p_teacher || p_student)
  student_to_teacher,  // KL(p_student || p_teacher)
};

/// Batch-mean KL between softmax(student/T) and softmax(teacher/T), scaled by
/// T^2. The teacher side is a constant: no gradient reaches it.
Tensor kl_divergence(const Tensor& student_logits, const Tensor& teacher_logits,
                     double temperature = 1.0,
                     KLDirection direction = KLDirection::teacher_to_student);

/// KL(target || softmax(student/T)) * T^2 against fixed target rows [N, K].
Tensor kl_divergence_to(const Tensor& student_logits, const MatrixRM& target_probs,
                        double temperature = 1.0);

}  // namespace lipbench
