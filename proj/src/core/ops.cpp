#include "lipbench/core/ops.hpp"

#include <cmath>
#include <string>

#include "lipbench/core/errors.hpp"

namespace lipbench {

using detail::make_result;
using detail::Node;

namespace {

/// Gradient buffer of parent i, or nullptr when that parent is not tracked.
Eigen::VectorXd* parent_grad(Node& self, std::size_t i) {
  auto& p = self.parents[i];
  return p->requires_grad ? &p->grad_buffer() : nullptr;
}

const Eigen::VectorXd& parent_value(const Node& self, std::size_t i) {
  return self.parents[i]->value;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw UsageError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_rank(const Tensor& x, Index rank, const char* op) {
  if (x.rank() != rank) {
    throw UsageError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_string(x.shape()));
  }
}

MatrixMap as_matrix(Eigen::VectorXd& v, Index rows, Index cols) {
  return MatrixMap(v.data(), rows, cols);
}

ConstMatrixMap as_matrix(const Eigen::VectorXd& v, Index rows, Index cols) {
  return ConstMatrixMap(v.data(), rows, cols);
}

Index rows_of(const Shape& s) { return s.empty() ? 1 : s[0]; }
Index cols_of(const Shape& s) {
  Index n = 1;
  for (std::size_t i = 1; i < s.size(); ++i) n *= s[i];
  return n;
}

MatrixRM row_softmax(const MatrixRM& x) {
  MatrixRM y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

MatrixRM row_log_softmax(const MatrixRM& x) {
  MatrixRM y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    const double lse = m + std::log((x.row(r).array() - m).exp().sum());
    y.row(r) = x.row(r).array() - lse;
  }
  return y;
}

}  // namespace

// ---- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return make_result(a.shape(), a.value() + b.value(), {a, b}, [](Node& self) {
    if (auto* g = parent_grad(self, 0)) *g += self.grad;
    if (auto* g = parent_grad(self, 1)) *g += self.grad;
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return make_result(a.shape(), a.value() - b.value(), {a, b}, [](Node& self) {
    if (auto* g = parent_grad(self, 0)) *g += self.grad;
    if (auto* g = parent_grad(self, 1)) *g -= self.grad;
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Eigen::VectorXd v = a.value().cwiseProduct(b.value());
  return make_result(a.shape(), std::move(v), {a, b}, [](Node& self) {
    if (auto* g = parent_grad(self, 0)) *g += self.grad.cwiseProduct(parent_value(self, 1));
    if (auto* g = parent_grad(self, 1)) *g += self.grad.cwiseProduct(parent_value(self, 0));
  });
}

Tensor scale(const Tensor& x, double factor) {
  return make_result(x.shape(), x.value() * factor, {x}, [factor](Node& self) {
    if (auto* g = parent_grad(self, 0)) *g += factor * self.grad;
  });
}

Tensor sum(const Tensor& x) {
  Eigen::VectorXd v(1);
  v[0] = x.value().sum();
  return make_result({1}, std::move(v), {x}, [](Node& self) {
    if (auto* g = parent_grad(self, 0)) g->array() += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.numel());
  if (n == 0) throw UsageError("mean of empty tensor");
  Eigen::VectorXd v(1);
  v[0] = x.value().sum() / n;
  return make_result({1}, std::move(v), {x}, [n](Node& self) {
    if (auto* g = parent_grad(self, 0)) g->array() += self.grad[0] / n;
  });
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator*(double s, const Tensor& x) { return scale(x, s); }

// ---- shape ----------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw UsageError("reshape: cannot view " + shape_string(x.shape()) + " as " +
                     shape_string(shape));
  }
  return make_result(std::move(shape), x.value(), {x}, [](Node& self) {
    if (auto* g = parent_grad(self, 0)) *g += self.grad;
  });
}

Tensor transpose(const Tensor& x) {
  require_rank(x, 2, "transpose");
  const Index m = x.dim(0), n = x.dim(1);
  Eigen::VectorXd v(m * n);
  as_matrix(v, n, m) = x.matrix().transpose();
  return make_result({n, m}, std::move(v), {x}, [m, n](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      as_matrix(*g, m, n) += as_matrix(self.grad, n, m).transpose();
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw UsageError("concat_rows: no inputs");
  const Index cols = cols_of(parts[0].shape());
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.rank() < 2 || cols_of(p.shape()) != cols) {
      throw UsageError("concat_rows: incompatible shape " + shape_string(p.shape()));
    }
    rows += p.dim(0);
  }
  Shape shape = parts[0].shape();
  shape[0] = rows;
  Eigen::VectorXd v(rows * cols);
  std::vector<Index> row_begin;
  Index r = 0;
  for (const auto& p : parts) {
    row_begin.push_back(r);
    v.segment(r * cols, p.numel()) = p.value();
    r += p.dim(0);
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return make_result(std::move(shape), std::move(v), std::move(parents),
                     [row_begin, cols](Node& self) {
                       for (std::size_t i = 0; i < self.parents.size(); ++i) {
                         if (auto* g = parent_grad(self, i)) {
                           *g += self.grad.segment(row_begin[i] * cols, g->size());
                         }
                       }
                     });
}

Tensor slice_rows(const Tensor& x, Index begin, Index count) {
  if (x.rank() < 1 || begin < 0 || count < 0 || begin + count > x.dim(0)) {
    throw UsageError("slice_rows: range out of bounds for " + shape_string(x.shape()));
  }
  const Index cols = cols_of(x.shape());
  Shape shape = x.shape();
  shape[0] = count;
  Eigen::VectorXd v = x.value().segment(begin * cols, count * cols);
  return make_result(std::move(shape), std::move(v), {x}, [begin, cols](Node& self) {
    if (auto* g = parent_grad(self, 0)) g->segment(begin * cols, self.grad.size()) += self.grad;
  });
}

Tensor swap_leading_axes(const Tensor& x) {
  require_rank(x, 3, "swap_leading_axes");
  const Index a = x.dim(0), b = x.dim(1), c = x.dim(2);
  auto permute = [](const Eigen::VectorXd& src, Eigen::VectorXd& dst, Index a, Index b, Index c) {
    for (Index i = 0; i < a; ++i)
      for (Index j = 0; j < b; ++j) dst.segment((j * a + i) * c, c) += src.segment((i * b + j) * c, c);
  };
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.numel());
  permute(x.value(), v, a, b, c);
  return make_result({b, a, c}, std::move(v), {x}, [a, b, c, permute](Node& self) {
    if (auto* g = parent_grad(self, 0)) permute(self.grad, *g, b, a, c);
  });
}

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw UsageError("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  Eigen::VectorXd v(m * n);
  as_matrix(v, m, n).noalias() = a.matrix() * b.matrix();
  return make_result({m, n}, std::move(v), {a, b}, [m, k, n](Node& self) {
    auto grad = as_matrix(self.grad, m, n);
    if (auto* g = parent_grad(self, 0)) {
      as_matrix(*g, m, k).noalias() += grad * as_matrix(parent_value(self, 1), k, n).transpose();
    }
    if (auto* g = parent_grad(self, 1)) {
      as_matrix(*g, k, n).noalias() += as_matrix(parent_value(self, 0), m, k).transpose() * grad;
    }
  });
}

Tensor affine(const Tensor& weight, const Tensor& x, const Tensor& bias) {
  require_rank(weight, 2, "affine");
  const Index out = weight.dim(0), in = weight.dim(1);
  if (rows_of(x.shape()) != in) {
    throw UsageError("affine: weight " + shape_string(weight.shape()) + " cannot consume " +
                     shape_string(x.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != out) throw UsageError("affine: bias length mismatch");
  const Index cols = cols_of(x.shape());
  Eigen::VectorXd v(out * cols);
  auto y = as_matrix(v, out, cols);
  y.noalias() = weight.matrix() * x.matrix();
  if (has_bias) y.colwise() += bias.value();
  Shape shape = x.shape();
  shape[0] = out;
  std::vector<Tensor> parents{weight, x};
  if (has_bias) parents.push_back(bias);
  return make_result(std::move(shape), std::move(v), std::move(parents),
                     [out, in, cols, has_bias](Node& self) {
                       auto grad = as_matrix(self.grad, out, cols);
                       if (auto* g = parent_grad(self, 0)) {
                         as_matrix(*g, out, in).noalias() +=
                             grad * as_matrix(parent_value(self, 1), in, cols).transpose();
                       }
                       if (auto* g = parent_grad(self, 1)) {
                         as_matrix(*g, in, cols).noalias() +=
                             as_matrix(parent_value(self, 0), out, in).transpose() * grad;
                       }
                       if (has_bias) {
                         if (auto* g = parent_grad(self, 2)) *g += grad.rowwise().sum();
                       }
                     });
}

// ---- activations ----------------------------------------------------------

Tensor relu(const Tensor& x) {
  Eigen::VectorXd v = x.value().cwiseMax(0.0);
  return make_result(x.shape(), std::move(v), {x}, [](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      *g += (parent_value(self, 0).array() > 0.0).select(self.grad, 0.0).matrix();
    }
  });
}

Tensor prelu(const Tensor& x, const Tensor& slope) {
  const Index rows = rows_of(x.shape()), cols = cols_of(x.shape());
  if (slope.numel() != rows) {
    throw UsageError("prelu: slope has " + std::to_string(slope.numel()) + " entries for " +
                     std::to_string(rows) + " channels");
  }
  Eigen::VectorXd v(x.numel());
  auto in = x.matrix();
  auto y = as_matrix(v, rows, cols);
  for (Index c = 0; c < rows; ++c) {
    const double a = slope.value()[c];
    y.row(c) = (in.row(c).array() > 0.0).select(in.row(c), a * in.row(c));
  }
  return make_result(x.shape(), std::move(v), {x, slope}, [rows, cols](Node& self) {
    auto in = as_matrix(parent_value(self, 0), rows, cols);
    const auto& a = parent_value(self, 1);
    auto grad = as_matrix(self.grad, rows, cols);
    if (auto* g = parent_grad(self, 0)) {
      auto gx = as_matrix(*g, rows, cols);
      for (Index c = 0; c < rows; ++c) {
        gx.row(c).array() += (in.row(c).array() > 0.0).select(grad.row(c), a[c] * grad.row(c)).array();
      }
    }
    if (auto* g = parent_grad(self, 1)) {
      for (Index c = 0; c < rows; ++c) {
        (*g)[c] += (in.row(c).array() > 0.0).select(0.0, in.row(c).array() * grad.row(c).array()).sum();
      }
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  Eigen::VectorXd v = (1.0 + (-x.value().array()).exp()).inverse().matrix();
  return make_result(x.shape(), std::move(v), {x}, [](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      const auto y = self.value.array();
      *g += (self.grad.array() * y * (1.0 - y)).matrix();
    }
  });
}

Tensor tanh(const Tensor& x) {
  Eigen::VectorXd v = x.value().array().tanh().matrix();
  return make_result(x.shape(), std::move(v), {x}, [](Node& self) {
    if (auto* g = parent_grad(self, 0)) {
      const auto y = self.value.array();
      *g += (self.grad.array() * (1.0 - y * y)).matrix();
    }
  });
}

Tensor softmax(const Tensor& x, int axis) {
  require_rank(x, 2, "softmax");
  if (axis != 0 && axis != 1) throw UsageError("softmax: axis must be 0 or 1");
  const Index m = x.dim(0), n = x.dim(1);
  Eigen::VectorXd v(x.numel());
  if (axis == 1) {
    as_matrix(v, m, n) = row_softmax(x.matrix());
  } else {
    MatrixRM t = row_softmax(x.matrix().transpose());
    as_matrix(v, m, n) = t.transpose();
  }
  return make_result(x.shape(), std::move(v), {x}, [m, n, axis](Node& self) {
    auto* g = parent_grad(self, 0);
    if (!g) return;
    auto y = as_matrix(self.value, m, n);
    auto gy = as_matrix(self.grad, m, n);
    auto gx = as_matrix(*g, m, n);
    if (axis == 1) {
      Eigen::VectorXd dot = (y.array() * gy.array()).rowwise().sum();
      gx.array() += y.array() * (gy.colwise() - dot).array();
    } else {
      Eigen::RowVectorXd dot = (y.array() * gy.array()).colwise().sum();
      gx.array() += y.array() * (gy.rowwise() - dot).array();
    }
  });
}

Tensor log_softmax(const Tensor& x) {
  require_rank(x, 2, "log_softmax");
  const Index m = x.dim(0), n = x.dim(1);
  Eigen::VectorXd v(x.numel());
  as_matrix(v, m, n) = row_log_softmax(x.matrix());
  return make_result(x.shape(), std::move(v), {x}, [m, n](Node& self) {
    auto* g = parent_grad(self, 0);
    if (!g) return;
    auto y = as_matrix(self.value, m, n);
    auto gy = as_matrix(self.grad, m, n);
    Eigen::VectorXd total = gy.rowwise().sum();
    as_matrix(*g, m, n).array() += gy.array() - (y.array().exp().colwise() * total.array());
  });
}

Tensor dropout(const Tensor& x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout: p must lie in [0, 1)");
  if (mode == Mode::eval || p == 0.0) return x;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd mask(x.numel());
  const double keep_scale = 1.0 / (1.0 - p);
  for (Index i = 0; i < mask.size(); ++i) mask[i] = u(rng) < p ? 0.0 : keep_scale;
  Eigen::VectorXd v = x.value().cwiseProduct(mask);
  return make_result(x.shape(), std::move(v), {x}, [mask = std::move(mask)](Node& self) {
    if (auto* g = parent_grad(self, 0)) *g += self.grad.cwiseProduct(mask);
  });
}

// ---- convolution ----------------------------------------------------------

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias, Index dilation,
              Index padding, const SequenceLayout* layout) {
  require_rank(input, 2, "conv1d");
  require_rank(weight, 3, "conv1d");
  const Index c_in = input.dim(0), total_in = input.dim(1);
  const Index c_out = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != c_in) {
    throw ConfigError("conv1d: weight " + shape_string(weight.shape()) + " expects " +
                      std::to_string(weight.dim(1)) + " input channels, got " + std::to_string(c_in));
  }
  if (dilation < 1) throw ConfigError("conv1d: dilation must be >= 1");
  if (padding < 0) throw ConfigError("conv1d: negative padding");
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != c_out) throw ConfigError("conv1d: bias length mismatch");

  SequenceLayout in_layout = layout ? *layout : SequenceLayout::single(total_in);
  if (in_layout.total() != total_in) throw UsageError("conv1d: layout does not cover the input");
  const Index shrink = dilation * (k - 1) - 2 * padding;
  if (in_layout.count() > 1 && shrink != 0) {
    throw ConfigError("conv1d: packed sequences require same padding");
  }
  std::vector<Index> out_lengths;
  for (Index s = 0; s < in_layout.count(); ++s) {
    const Index len = in_layout.length(s) - shrink;
    if (len < 1) throw ConfigError("conv1d: sequence too short for kernel");
    out_lengths.push_back(len);
  }
  SequenceLayout out_layout(out_lengths);
  const Index total_out = out_layout.total();

  // im2col: row (i*k + j) holds the input channel i tapped at offset j*dilation - padding.
  MatrixRM columns = MatrixRM::Zero(c_in * k, total_out);
  auto x = input.matrix();
  for (Index s = 0; s < in_layout.count(); ++s) {
    const Index in_off = in_layout.offset(s), in_len = in_layout.length(s);
    const Index out_off = out_layout.offset(s), out_len = out_layout.length(s);
    for (Index j = 0; j < k; ++j) {
      const Index shift = j * dilation - padding;
      const Index t_begin = std::max<Index>(0, -shift);
      const Index t_end = std::min<Index>(out_len, in_len - shift);
      if (t_end <= t_begin) continue;
      for (Index i = 0; i < c_in; ++i) {
        columns.row(i * k + j).segment(out_off + t_begin, t_end - t_begin) =
            x.row(i).segment(in_off + t_begin + shift, t_end - t_begin);
      }
    }
  }

  Eigen::VectorXd v(c_out * total_out);
  auto y = as_matrix(v, c_out, total_out);
  y.noalias() = ConstMatrixMap(weight.value().data(), c_out, c_in * k) * columns;
  if (has_bias) y.colwise() += bias.value();

  std::vector<Tensor> parents{input, weight};
  if (has_bias) parents.push_back(bias);
  return make_result(
      {c_out, total_out}, std::move(v), std::move(parents),
      [columns = std::move(columns), in_layout, out_layout, c_in, c_out, k, dilation, padding,
       total_in, total_out, has_bias](Node& self) {
        auto grad = as_matrix(self.grad, c_out, total_out);
        if (auto* g = parent_grad(self, 1)) {
          as_matrix(*g, c_out, c_in * k).noalias() += grad * columns.transpose();
        }
        if (has_bias) {
          if (auto* g = parent_grad(self, 2)) *g += grad.rowwise().sum();
        }
        if (auto* g = parent_grad(self, 0)) {
          MatrixRM dcols =
              as_matrix(parent_value(self, 1), c_out, c_in * k).transpose() * grad;
          auto gx = as_matrix(*g, c_in, total_in);
          for (Index s = 0; s < in_layout.count(); ++s) {
            const Index in_off = in_layout.offset(s), in_len = in_layout.length(s);
            const Index out_off = out_layout.offset(s), out_len = out_layout.length(s);
            for (Index j = 0; j < k; ++j) {
              const Index shift = j * dilation - padding;
              const Index t_begin = std::max<Index>(0, -shift);
              const Index t_end = std::min<Index>(out_len, in_len - shift);
              if (t_end <= t_begin) continue;
              for (Index i = 0; i < c_in; ++i) {
                gx.row(i).segment(in_off + t_begin + shift, t_end - t_begin) +=
                    dcols.row(i * k + j).segment(out_off + t_begin, t_end - t_begin);
              }
            }
          }
        }
      });
}

Tensor conv1d_same(const Tensor& input, const Tensor& weight, const Tensor& bias, Index dilation,
                   const SequenceLayout* layout) {
  require_rank(weight, 3, "conv1d");
  const Index k = weight.dim(2);
  if (k % 2 == 0) throw ConfigError("conv1d: same padding needs an odd kernel, got " + std::to_string(k));
  return conv1d(input, weight, bias, dilation, dilation * (k - 1) / 2, layout);
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, Index stride,
              Index padding) {
  require_rank(input, 4, "conv2d");
  require_rank(weight, 4, "conv2d");
  const Index frames = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
  const Index c_out = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != c_in) throw ConfigError("conv2d: input channel mismatch");
  if (stride < 1 || padding < 0) throw ConfigError("conv2d: bad stride/padding");
  const Index ho = (h + 2 * padding - kh) / stride + 1;
  const Index wo = (w + 2 * padding - kw) / stride + 1;
  if (ho < 1 || wo < 1) throw ConfigError("conv2d: kernel larger than padded frame");
  const bool has_bias = bias.defined();
  const Index plane = ho * wo, cols = frames * plane, patch = c_in * kh * kw;

  MatrixRM columns = MatrixRM::Zero(patch, cols);
  const double* x = input.value().data();
  for (Index f = 0; f < frames; ++f)
    for (Index c = 0; c < c_in; ++c)
      for (Index dy = 0; dy < kh; ++dy)
        for (Index dx = 0; dx < kw; ++dx) {
          const Index row = (c * kh + dy) * kw + dx;
          for (Index oy = 0; oy < ho; ++oy) {
            const Index iy = oy * stride + dy - padding;
            if (iy < 0 || iy >= h) continue;
            for (Index ox = 0; ox < wo; ++ox) {
              const Index ix = ox * stride + dx - padding;
              if (ix < 0 || ix >= w) continue;
              columns(row, f * plane + oy * wo + ox) = x[((f * c_in + c) * h + iy) * w + ix];
            }
          }
        }

  MatrixRM out = ConstMatrixMap(weight.value().data(), c_out, patch) * columns;
  if (has_bias) out.colwise() += bias.value();
  Eigen::VectorXd v(c_out * cols);
  for (Index f = 0; f < frames; ++f)
    for (Index c = 0; c < c_out; ++c) v.segment((f * c_out + c) * plane, plane) = out.row(c).segment(f * plane, plane);

  std::vector<Tensor> parents{input, weight};
  if (has_bias) parents.push_back(bias);
  return make_result(
      {frames, c_out, ho, wo}, std::move(v), std::move(parents),
      [columns = std::move(columns), frames, c_in, h, w, c_out, kh, kw, ho, wo, stride, padding,
       plane, cols, patch, has_bias](Node& self) {
        MatrixRM grad(c_out, cols);
        for (Index f = 0; f < frames; ++f)
          for (Index c = 0; c < c_out; ++c)
            grad.row(c).segment(f * plane, plane) = self.grad.segment((f * c_out + c) * plane, plane);
        if (auto* g = parent_grad(self, 1)) as_matrix(*g, c_out, patch).noalias() += grad * columns.transpose();
        if (has_bias) {
          if (auto* g = parent_grad(self, 2)) *g += grad.rowwise().sum();
        }
        if (auto* g = parent_grad(self, 0)) {
          MatrixRM dcols = as_matrix(parent_value(self, 1), c_out, patch).transpose() * grad;
          double* gx = g->data();
          for (Index f = 0; f < frames; ++f)
            for (Index c = 0; c < c_in; ++c)
              for (Index dy = 0; dy < kh; ++dy)
                for (Index dx = 0; dx < kw; ++dx) {
                  const Index row = (c * kh + dy) * kw + dx;
                  for (Index oy = 0; oy < ho; ++oy) {
                    const Index iy = oy * stride + dy - padding;
                    if (iy < 0 || iy >= h) continue;
                    for (Index ox = 0; ox < wo; ++ox) {
                      const Index ix = ox * stride + dx - padding;
                      if (ix < 0 || ix >= w) continue;
                      gx[((f * c_in + c) * h + iy) * w + ix] += dcols(row, f * plane + oy * wo + ox);
                    }
                  }
                }
        }
      });
}

// ---- normalisation and pooling -------------------------------------------

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormBuffers& buffers, Mode mode) {
  const Index channels = rows_of(x.shape()), m = cols_of(x.shape());
  if (gamma.numel() != channels || beta.numel() != channels ||
      buffers.running_mean.numel() != channels || buffers.running_var.numel() != channels) {
    throw ConfigError("batch_norm: " + std::to_string(channels) +
                      " channels do not match the normalisation state");
  }
  if (m < 1) throw UsageError("batch_norm: empty input");
  auto in = x.matrix();
  Eigen::VectorXd mu, var;
  if (mode == Mode::train) {
    mu = in.rowwise().mean();
    var = (in.colwise() - mu).array().square().rowwise().mean();
    const double unbias = m > 1 ? static_cast<double>(m) / static_cast<double>(m - 1) : 1.0;
    buffers.running_mean.value() = (1.0 - buffers.momentum) * buffers.running_mean.value() + buffers.momentum * mu;
    buffers.running_var.value() =
        (1.0 - buffers.momentum) * buffers.running_var.value() + buffers.momentum * unbias * var;
  } else {
    mu = buffers.running_mean.value();
    var = buffers.running_var.value();
  }
  Eigen::VectorXd inv_std = (var.array() + buffers.eps).rsqrt().matrix();
  MatrixRM normalised = (in.colwise() - mu).array().colwise() * inv_std.array();
  Eigen::VectorXd v(x.numel());
  auto y = as_matrix(v, channels, m);
  y = (normalised.array().colwise() * gamma.value().array()).matrix();
  y.colwise() += beta.value();

  const bool batch_stats = mode == Mode::train;
  return make_result(
      x.shape(), std::move(v), {x, gamma, beta},
      [normalised = std::move(normalised), inv_std, channels, m, batch_stats](Node& self) {
        auto grad = as_matrix(self.grad, channels, m);
        if (auto* g = parent_grad(self, 1)) *g += (grad.array() * normalised.array()).rowwise().sum().matrix();
        if (auto* g = parent_grad(self, 2)) *g += grad.rowwise().sum();
        if (auto* g = parent_grad(self, 0)) {
          const auto& gamma = parent_value(self, 1);
          auto gx = as_matrix(*g, channels, m);
          Eigen::VectorXd coef = gamma.cwiseProduct(inv_std);
          if (batch_stats) {
            Eigen::VectorXd mean_g = grad.rowwise().mean();
            Eigen::VectorXd mean_gx = (grad.array() * normalised.array()).rowwise().mean();
            MatrixRM centred = grad.colwise() - mean_g;
            centred -= (normalised.array().colwise() * mean_gx.array()).matrix();
            gx += (centred.array().colwise() * coef.array()).matrix();
          } else {
            gx += (grad.array().colwise() * coef.array()).matrix();
          }
        }
      });
}

Tensor batch_norm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    BatchNormBuffers& buffers, Mode mode) {
  require_rank(x, 3, "batch_norm1d");
  const Index n = x.dim(0), c = x.dim(1), t = x.dim(2);
  Tensor channel_major = reshape(swap_leading_axes(x), {c, n * t});
  Tensor y = batch_norm(channel_major, gamma, beta, buffers, mode);
  return swap_leading_axes(reshape(y, {c, n, t}));
}

Tensor segment_mean(const Tensor& x, const SequenceLayout& layout) {
  require_rank(x, 2, "segment_mean");
  const Index channels = x.dim(0), total = x.dim(1), count = layout.count();
  if (layout.total() != total) throw UsageError("segment_mean: layout does not cover the input");
  Eigen::VectorXd v(channels * count);
  auto y = as_matrix(v, channels, count);
  auto in = x.matrix();
  for (Index s = 0; s < count; ++s) {
    if (layout.length(s) < 1) throw UsageError("segment_mean: empty sequence");
    y.col(s) = in.middleCols(layout.offset(s), layout.length(s)).rowwise().mean();
  }
  return make_result({channels, count}, std::move(v), {x}, [layout, channels, total, count](Node& self) {
    auto* g = parent_grad(self, 0);
    if (!g) return;
    auto grad = as_matrix(self.grad, channels, count);
    auto gx = as_matrix(*g, channels, total);
    for (Index s = 0; s < count; ++s) {
      const double inv = 1.0 / static_cast<double>(layout.length(s));
      gx.middleCols(layout.offset(s), layout.length(s)).colwise() += grad.col(s) * inv;
    }
  });
}

Tensor scale_segments(const Tensor& x, const Tensor& gate, const SequenceLayout& layout) {
  require_rank(x, 2, "scale_segments");
  require_rank(gate, 2, "scale_segments");
  const Index channels = x.dim(0), total = x.dim(1), count = layout.count();
  if (gate.dim(0) != channels || gate.dim(1) != count || layout.total() != total) {
    throw UsageError("scale_segments: gate " + shape_string(gate.shape()) + " does not match input " +
                     shape_string(x.shape()));
  }
  Eigen::VectorXd v(x.numel());
  auto y = as_matrix(v, channels, total);
  auto in = x.matrix();
  auto gv = gate.matrix();
  for (Index s = 0; s < count; ++s) {
    y.middleCols(layout.offset(s), layout.length(s)) =
        in.middleCols(layout.offset(s), layout.length(s)).array().colwise() * gv.col(s).array();
  }
  return make_result(x.shape(), std::move(v), {x, gate}, [layout, channels, total, count](Node& self) {
    auto grad = as_matrix(self.grad, channels, total);
    auto in = as_matrix(parent_value(self, 0), channels, total);
    auto gv = as_matrix(parent_value(self, 1), channels, count);
    auto* gx = parent_grad(self, 0);
    auto* gg = parent_grad(self, 1);
    for (Index s = 0; s < count; ++s) {
      const Index off = layout.offset(s), len = layout.length(s);
      if (gx) {
        as_matrix(*gx, channels, total).middleCols(off, len).array() +=
            grad.middleCols(off, len).array().colwise() * gv.col(s).array();
      }
      if (gg) {
        as_matrix(*gg, channels, count).col(s) +=
            (grad.middleCols(off, len).array() * in.middleCols(off, len).array()).rowwise().sum().matrix();
      }
    }
  });
}

Tensor global_avg_pool_time(const Tensor& x) {
  require_rank(x, 2, "global_avg_pool_time");
  if (x.dim(1) < 1) throw UsageError("global_avg_pool_time: T must be >= 1");
  return reshape(segment_mean(x, SequenceLayout::single(x.dim(1))), {x.dim(0)});
}

// ---- recurrent ------------------------------------------------------------

Tensor gru_sequence(const Tensor& x, const SequenceLayout& layout, const Tensor& w_ih,
                    const Tensor& w_hh, const Tensor& b_ih, const Tensor& b_hh, bool reverse) {
  require_rank(x, 2, "gru_sequence");
  const Index c_in = x.dim(0), total = x.dim(1);
  const Index hidden = w_hh.dim(1);
  if (w_ih.rank() != 2 || w_ih.dim(0) != 3 * hidden || w_ih.dim(1) != c_in || w_hh.dim(0) != 3 * hidden ||
      b_ih.numel() != 3 * hidden || b_hh.numel() != 3 * hidden) {
    throw ConfigError("gru_sequence: parameter shapes inconsistent with hidden size " +
                      std::to_string(hidden) + " and input width " + std::to_string(c_in));
  }
  if (layout.total() != total) throw UsageError("gru_sequence: layout does not cover the input");
  const Index h3 = 3 * hidden;

  Eigen::MatrixXd gi = ConstMatrixMap(w_ih.value().data(), h3, c_in) * x.matrix();
  gi.colwise() += b_ih.value();
  const Eigen::MatrixXd whh = ConstMatrixMap(w_hh.value().data(), h3, hidden);
  const Eigen::VectorXd bhh = b_hh.value();

  Eigen::MatrixXd gates(h3, total);     // r, z, n per column
  Eigen::MatrixXd hn_term(hidden, total);  // W_hn h_prev + b_hn
  Eigen::MatrixXd h_prev(hidden, total);
  Eigen::MatrixXd out(hidden, total);
  for (Index s = 0; s < layout.count(); ++s) {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(hidden);
    const Index off = layout.offset(s), len = layout.length(s);
    for (Index step = 0; step < len; ++step) {
      const Index t = off + (reverse ? len - 1 - step : step);
      Eigen::VectorXd gh = whh * h + bhh;
      auto g = gi.col(t);
      Eigen::ArrayXd r = (1.0 + (-(g.segment(0, hidden) + gh.segment(0, hidden)).array()).exp()).inverse();
      Eigen::ArrayXd z = (1.0 + (-(g.segment(hidden, hidden) + gh.segment(hidden, hidden)).array()).exp()).inverse();
      Eigen::ArrayXd n = (g.segment(2 * hidden, hidden).array() + r * gh.segment(2 * hidden, hidden).array()).tanh();
      h_prev.col(t) = h;
      hn_term.col(t) = gh.segment(2 * hidden, hidden);
      gates.col(t) << r.matrix(), z.matrix(), n.matrix();
      h = ((1.0 - z) * n + z * h.array()).matrix();
      out.col(t) = h;
    }
  }

  Eigen::VectorXd v(hidden * total);
  as_matrix(v, hidden, total) = out;
  return make_result(
      {hidden, total}, std::move(v), {x, w_ih, w_hh, b_ih, b_hh},
      [layout, gates = std::move(gates), hn_term = std::move(hn_term), h_prev = std::move(h_prev), c_in,
       hidden, total, h3, reverse](Node& self) {
        const Eigen::MatrixXd whh = as_matrix(parent_value(self, 2), h3, hidden);
        const Eigen::MatrixXd grad = as_matrix(self.grad, hidden, total);
        Eigen::MatrixXd d_gi(h3, total);
        Eigen::MatrixXd d_gh(h3, total);
        for (Index s = 0; s < layout.count(); ++s) {
          Eigen::VectorXd carry = Eigen::VectorXd::Zero(hidden);
          const Index off = layout.offset(s), len = layout.length(s);
          for (Index step = len - 1; step >= 0; --step) {
            const Index t = off + (reverse ? len - 1 - step : step);
            const Eigen::ArrayXd dh = (grad.col(t) + carry).array();
            const Eigen::ArrayXd r = gates.col(t).segment(0, hidden).array();
            const Eigen::ArrayXd z = gates.col(t).segment(hidden, hidden).array();
            const Eigen::ArrayXd n = gates.col(t).segment(2 * hidden, hidden).array();
            const Eigen::ArrayXd hp = h_prev.col(t).array();
            const Eigen::ArrayXd da_n = dh * (1.0 - z) * (1.0 - n * n);
            const Eigen::ArrayXd da_z = dh * (hp - n) * z * (1.0 - z);
            const Eigen::ArrayXd da_r = da_n * hn_term.col(t).array() * r * (1.0 - r);
            d_gi.col(t) << da_r.matrix(), da_z.matrix(), da_n.matrix();
            d_gh.col(t) << da_r.matrix(), da_z.matrix(), (da_n * r).matrix();
            carry = (dh * z).matrix() + whh.transpose() * d_gh.col(t);
          }
        }
        if (auto* g = parent_grad(self, 0)) {
          as_matrix(*g, c_in, total) += as_matrix(parent_value(self, 1), h3, c_in).transpose() * d_gi;
        }
        if (auto* g = parent_grad(self, 1)) {
          as_matrix(*g, h3, c_in) += d_gi * as_matrix(parent_value(self, 0), c_in, total).transpose();
        }
        if (auto* g = parent_grad(self, 2)) as_matrix(*g, h3, hidden) += d_gh * h_prev.transpose();
        if (auto* g = parent_grad(self, 3)) *g += d_gi.rowwise().sum();
        if (auto* g = parent_grad(self, 4)) *g += d_gh.rowwise().sum();
      });
}

// ---- losses ---------------------------------------------------------------

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  require_rank(logits, 2, "cross_entropy");
  const Index n = logits.dim(0), k = logits.dim(1);
  if (k < 2) throw ConfigError("cross_entropy: need at least two classes");
  if (static_cast<Index>(targets.size()) != n) throw InputError("cross_entropy: one target per row required");
  MatrixRM soft = MatrixRM::Zero(n, k);
  for (Index i = 0; i < n; ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= k) {
      throw InputError("cross_entropy: target " + std::to_string(t) + " outside [0, " + std::to_string(k) + ")");
    }
    soft(i, t) = 1.0;
  }
  return cross_entropy(logits, soft);
}

Tensor cross_entropy(const Tensor& logits, const MatrixRM& soft_targets) {
  require_rank(logits, 2, "cross_entropy");
  const Index n = logits.dim(0), k = logits.dim(1);
  if (k < 2) throw ConfigError("cross_entropy: need at least two classes");
  if (soft_targets.rows() != n || soft_targets.cols() != k) {
    throw InputError("cross_entropy: target matrix shape mismatch");
  }
  MatrixRM logp = row_log_softmax(logits.matrix());
  Eigen::VectorXd v(1);
  v[0] = -(soft_targets.array() * logp.array()).sum() / static_cast<double>(n);
  return make_result({1}, std::move(v), {logits}, [logp = std::move(logp), soft_targets, n, k](Node& self) {
    auto* g = parent_grad(self, 0);
    if (!g) return;
    const double coef = self.grad[0] / static_cast<double>(n);
    Eigen::VectorXd mass = soft_targets.rowwise().sum();
    as_matrix(*g, n, k).array() += coef * ((logp.array().exp().colwise() * mass.array()) - soft_targets.array());
  });
}

Tensor kl_divergence(const Tensor& student_logits, const Tensor& teacher_logits, double temperature,
                     KLDirection direction) {
  require_same_shape(student_logits, teacher_logits, "kl_divergence");
  require_rank(student_logits, 2, "kl_divergence");
  if (!(temperature > 0.0)) throw ConfigError("kl_divergence: temperature must be positive");
  if (direction == KLDirection::teacher_to_student) {
    MatrixRM teacher = row_softmax(teacher_logits.matrix() / temperature);
    return kl_divergence_to(student_logits, teacher, temperature);
  }
  const Index n = student_logits.dim(0), k = student_logits.dim(1);
  MatrixRM log_q = row_log_softmax(student_logits.matrix() / temperature);
  MatrixRM log_p = row_log_softmax(teacher_logits.matrix() / temperature);
  MatrixRM q = log_q.array().exp();
  Eigen::VectorXd rows = (q.array() * (log_q - log_p).array()).rowwise().sum();
  const double t2 = temperature * temperature;
  Eigen::VectorXd v(1);
  v[0] = t2 * rows.sum() / static_cast<double>(n);
  return make_result({1}, std::move(v), {student_logits},
                     [q = std::move(q), log_q = std::move(log_q), log_p = std::move(log_p), rows, n, k,
                      temperature](Node& self) {
                       auto* g = parent_grad(self, 0);
                       if (!g) return;
                       const double coef = self.grad[0] * temperature / static_cast<double>(n);
                       MatrixRM d = ((log_q - log_p).colwise() - rows);
                       as_matrix(*g, n, k).array() += coef * q.array() * d.array();
                     });
}

Tensor kl_divergence_to(const Tensor& student_logits, const MatrixRM& target_probs, double temperature) {
  require_rank(student_logits, 2, "kl_divergence");
  const Index n = student_logits.dim(0), k = student_logits.dim(1);
  if (target_probs.rows() != n || target_probs.cols() != k) {
    throw UsageError("kl_divergence: target shape mismatch");
  }
  if (!(temperature > 0.0)) throw ConfigError("kl_divergence: temperature must be positive");
  MatrixRM log_q = row_log_softmax(student_logits.matrix() / temperature);
  double total = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < k; ++j) {
      const double p = target_probs(i, j);
      if (p > 0.0) total += p * (std::log(p) - log_q(i, j));
    }
  const double t2 = temperature * temperature;
  Eigen::VectorXd v(1);
  v[0] = t2 * total / static_cast<double>(n);
  return make_result({1}, std::move(v), {student_logits},
                     [log_q = std::move(log_q), target_probs, n, k, temperature](Node& self) {
                       auto* g = parent_grad(self, 0);
                       if (!g) return;
                       const double coef = self.grad[0] * temperature / static_cast<double>(n);
                       Eigen::VectorXd mass = target_probs.rowwise().sum();
                       as_matrix(*g, n, k).array() +=
                           coef * ((log_q.array().exp().colwise() * mass.array()) - target_probs.array());
                     });
}

}  // namespace lipbench
