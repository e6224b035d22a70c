#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lipbench {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<MatrixRM>;
using ConstMatrixMap = Eigen::Map<const MatrixRM>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

Index shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  Eigen::VectorXd value;
  Eigen::VectorXd grad;  // empty until first accumulation
  bool requires_grad = false;
  std::uint64_t sequence = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Eigen::VectorXd& grad_buffer();
};

}  // namespace detail

/// Dense row-major array of doubles with an optional gradient slot.
///
/// Tensor is a shared handle: copies alias the same storage, as parameters
/// must be shared between a model and its optimizer. Use clone() for a deep
/// copy. Ops that consume tracked tensors record a backward closure; the
/// graph lives as long as the resulting tensors do.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor from_vector(Shape shape, Eigen::VectorXd values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  Index rank() const { return static_cast<Index>(shape().size()); }
  Index dim(Index axis) const;
  Index numel() const;

  Eigen::VectorXd& value();
  const Eigen::VectorXd& value() const;
  std::span<double> data();
  std::span<const double> data() const;
  double item() const;
  double at(std::initializer_list<Index> index) const;

  /// Row-major 2-D view: rows = shape[0], cols = product of remaining axes.
  MatrixMap matrix();
  ConstMatrixMap matrix() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  /// Gradient buffer; zero-filled and allocated on first access.
  Eigen::VectorXd& grad();
  const Eigen::VectorXd& grad() const;
  void zero_grad();

  Tensor clone() const;
  Tensor detach() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// True when new ops record backward closures on this thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

/// Creates the result node of an op. Parents and the closure are attached
/// only when some parent requires grad and grad mode is on.
Tensor make_result(Shape shape, Eigen::VectorXd value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward);

}  // namespace detail

/// Reverse-mode sweep from a scalar loss. Nodes are visited in exact reverse
/// creation order; gradients accumulate additively into every tracked input.
void backward(const Tensor& loss);

}  // namespace lipbench
