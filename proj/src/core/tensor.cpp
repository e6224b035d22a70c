#include "lipbench/core/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "lipbench/core/errors.hpp"

namespace lipbench {

namespace {

thread_local bool t_grad_enabled = true;
std::atomic<std::uint64_t> g_sequence{1};

std::shared_ptr<detail::Node> new_node(Shape shape, Eigen::VectorXd value, bool requires_grad) {
  const Index n = shape_numel(shape);
  if (value.size() != n) {
    throw UsageError("tensor data length " + std::to_string(value.size()) +
                     " does not match shape " + shape_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->sequence = g_sequence.fetch_add(1, std::memory_order_relaxed);
  return node;
}

}  // namespace

Index shape_numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) {
    if (d < 0) throw UsageError("negative dimension in shape " + shape_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Eigen::VectorXd& detail::Node::grad_buffer() {
  if (grad.size() != value.size()) grad = Eigen::VectorXd::Zero(value.size());
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const Index n = shape_numel(shape);
  return Tensor(new_node(std::move(shape), Eigen::VectorXd::Zero(n), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const Index n = shape_numel(shape);
  return Tensor(new_node(std::move(shape), Eigen::VectorXd::Constant(n, value), requires_grad));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  Eigen::VectorXd v = ConstVectorMap(values.data(), static_cast<Index>(values.size()));
  return Tensor(new_node(std::move(shape), std::move(v), requires_grad));
}

Tensor Tensor::from_vector(Shape shape, Eigen::VectorXd values, bool requires_grad) {
  return Tensor(new_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw UsageError("use of undefined tensor");
  return node_->shape;
}

Index Tensor::dim(Index axis) const {
  const Shape& s = shape();
  if (axis < 0) axis += static_cast<Index>(s.size());
  if (axis < 0 || axis >= static_cast<Index>(s.size())) {
    throw UsageError("axis out of range for shape " + shape_string(s));
  }
  return s[static_cast<std::size_t>(axis)];
}

Index Tensor::numel() const { return node_ ? node_->value.size() : 0; }

Eigen::VectorXd& Tensor::value() {
  if (!node_) throw UsageError("use of undefined tensor");
  return node_->value;
}

const Eigen::VectorXd& Tensor::value() const {
  if (!node_) throw UsageError("use of undefined tensor");
  return node_->value;
}

std::span<double> Tensor::data() {
  auto& v = value();
  return {v.data(), static_cast<std::size_t>(v.size())};
}

std::span<const double> Tensor::data() const {
  const auto& v = value();
  return {v.data(), static_cast<std::size_t>(v.size())};
}

double Tensor::item() const {
  if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_string(shape()));
  return value()[0];
}

double Tensor::at(std::initializer_list<Index> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) throw UsageError("index rank mismatch");
  Index flat = 0;
  std::size_t axis = 0;
  for (Index i : index) {
    if (i < 0 || i >= s[axis]) throw UsageError("index out of range");
    flat = flat * s[axis] + i;
    ++axis;
  }
  return value()[flat];
}

MatrixMap Tensor::matrix() {
  const Index rows = shape().empty() ? 1 : shape()[0];
  const Index cols = rows == 0 ? 0 : numel() / rows;
  return MatrixMap(value().data(), rows, cols);
}

ConstMatrixMap Tensor::matrix() const {
  const Index rows = shape().empty() ? 1 : shape()[0];
  const Index cols = rows == 0 ? 0 : numel() / rows;
  return ConstMatrixMap(value().data(), rows, cols);
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  if (!node_) throw UsageError("use of undefined tensor");
  node_->requires_grad = on;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }

Eigen::VectorXd& Tensor::grad() {
  if (!node_) throw UsageError("use of undefined tensor");
  return node_->grad_buffer();
}

const Eigen::VectorXd& Tensor::grad() const {
  if (!node_) throw UsageError("use of undefined tensor");
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  if (node_) node_->grad = Eigen::VectorXd::Zero(node_->value.size());
}

Tensor Tensor::clone() const {
  return Tensor(new_node(shape(), value(), requires_grad()));
}

Tensor Tensor::detach() const { return Tensor(new_node(shape(), value(), false)); }

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Tensor detail::make_result(Shape shape, Eigen::VectorXd value, std::vector<Tensor> parents,
                           std::function<void(Node&)> backward) {
  bool track = false;
  if (t_grad_enabled) {
    for (const auto& p : parents) track = track || p.requires_grad();
  }
  auto node = new_node(std::move(shape), std::move(value), track);
  if (track) {
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward() requires a scalar loss");
  }
  const auto& root = loss.node();
  if (!root->requires_grad) return;

  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->sequence > b->sequence; });

  root->grad_buffer()[0] += 1.0;
  for (detail::Node* n : order) {
    if (n->backward && n->grad.size() == n->value.size()) n->backward(*n);
  }
}

}  // namespace lipbench
