#include "nsx/tensor/tensor.hpp"

#include <sstream>
#include <unordered_set>

namespace nsx {

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index extent : shape) n *= extent;
  return n;
}

namespace {
thread_local bool grad_enabled = true;

void check_shape(const Shape& shape) {
  for (Index extent : shape) {
    if (extent <= 0) throw ShapeError("tensor: non-positive extent in shape " + to_string(shape));
  }
}
}  // namespace

bool GradMode::enabled() { return grad_enabled; }
void GradMode::set_enabled(bool enabled) { grad_enabled = enabled; }

NoGradGuard::NoGradGuard() : previous_(grad_enabled) { grad_enabled = false; }
NoGradGuard::~NoGradGuard() { grad_enabled = previous_; }

template <typename Real>
BasicTensor<Real>::BasicTensor(Shape shape, Real fill) {
  check_shape(shape);
  node_ = std::make_shared<detail::Node<Real>>();
  node_->data.assign(static_cast<std::size_t>(nsx::numel(shape)), fill);
  node_->shape = std::move(shape);
}

template <typename Real>
BasicTensor<Real>::BasicTensor(Shape shape, std::vector<Real> values) {
  check_shape(shape);
  if (nsx::numel(shape) != static_cast<Index>(values.size())) {
    throw ShapeError("tensor: shape " + to_string(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  }
  node_ = std::make_shared<detail::Node<Real>>();
  node_->shape = std::move(shape);
  node_->data = std::move(values);
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::scalar(Real value) {
  return BasicTensor(Shape{1}, value);
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::from(std::initializer_list<Real> values) {
  return BasicTensor(Shape{static_cast<Index>(values.size())}, std::vector<Real>(values));
}

template <typename Real>
void BasicTensor<Real>::require_defined() const {
  if (!node_) throw std::logic_error("tensor: use of undefined tensor");
}

template <typename Real>
const Shape& BasicTensor<Real>::shape() const {
  require_defined();
  return node_->shape;
}

template <typename Real>
Index BasicTensor<Real>::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for " + to_string(s));
  }
  return s[axis];
}

template <typename Real>
Index BasicTensor<Real>::numel() const {
  require_defined();
  return static_cast<Index>(node_->data.size());
}

template <typename Real>
std::span<const Real> BasicTensor<Real>::data() const {
  require_defined();
  return node_->data;
}

template <typename Real>
std::span<Real> BasicTensor<Real>::mutable_data() {
  require_defined();
  if (!node_->parents.empty() || node_->backward) {
    throw std::logic_error(std::string("tensor: result of '") + node_->op + "' is immutable");
  }
  return node_->data;
}

template <typename Real>
Real BasicTensor<Real>::item() const {
  if (numel() != 1) throw ShapeError("item: tensor of shape " + to_string(shape()) + " is not a scalar");
  return node_->data[0];
}

template <typename Real>
Real BasicTensor<Real>::at(Index flat) const {
  require_defined();
  return node_->data.at(static_cast<std::size_t>(flat));
}

template <typename Real>
bool BasicTensor<Real>::requires_grad() const {
  require_defined();
  return node_->requires_grad;
}

template <typename Real>
BasicTensor<Real>& BasicTensor<Real>::set_requires_grad(bool value) {
  require_defined();
  if (!is_leaf()) throw std::logic_error("set_requires_grad: only leaves can change requires_grad");
  node_->requires_grad = value;
  return *this;
}

template <typename Real>
bool BasicTensor<Real>::is_leaf() const {
  require_defined();
  return node_->parents.empty() && !node_->backward;
}

template <typename Real>
bool BasicTensor<Real>::has_grad() const {
  require_defined();
  return !node_->grad.empty();
}

template <typename Real>
std::span<const Real> BasicTensor<Real>::grad() const {
  require_defined();
  return node_->grad;
}

template <typename Real>
std::span<Real> BasicTensor<Real>::mutable_grad() {
  require_defined();
  return node_->ensure_grad();
}

template <typename Real>
void BasicTensor<Real>::zero_grad() {
  require_defined();
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), Real(0));
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::detach() const {
  require_defined();
  return BasicTensor(node_->shape, node_->data);
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::clone() const {
  BasicTensor copy = detach();
  copy.node_->requires_grad = node_->requires_grad;
  return copy;
}

template <typename Real>
BasicTensor<Real> BasicTensor<Real>::make_result(
    Shape shape, std::vector<Real> data, const char* op, std::vector<BasicTensor> parents,
    std::function<void(detail::Node<Real>&)> backward) {
  auto node = std::make_shared<detail::Node<Real>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool track = false;
  if (GradMode::enabled()) {
    for (const auto& p : parents) track = track || p.requires_grad();
  }
  if (track) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_);
    node->backward = std::move(backward);
  }
  return BasicTensor(std::move(node));
}

template <typename Real>
void BasicTensor<Real>::backward() const {
  require_defined();
  if (numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + to_string(shape()));
  }
  if (!node_->requires_grad) {
    throw std::logic_error("backward: loss does not depend on any tensor requiring grad");
  }
  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node<Real>*> order;
  std::unordered_set<detail::Node<Real>*> visited;
  std::vector<std::pair<detail::Node<Real>*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node<Real>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  node_->ensure_grad()[0] += Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node<Real>* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace nsx
