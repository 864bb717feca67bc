#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsx {

using Index = std::int64_t;
using Shape = std::vector<Index>;

/// Raised for any shape or argument mismatch; the message names the op and
/// the offending shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string to_string(const Shape& shape);
Index numel(const Shape& shape);

/// Thread-local switch controlling whether ops record backward closures.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool enabled);
};

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

template <typename Real>
struct Node {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  std::vector<Real>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), Real(0));
    return grad;
  }
};

}  // namespace detail

/// Dense row-major tensor participating in reverse-mode differentiation.
///
/// Handles share storage: copying a tensor copies the handle, not the data.
/// Op results are immutable; only leaves (parameters, inputs) expose mutable
/// data, which is what the optimizer updates in place.
template <typename Real>
class BasicTensor {
 public:
  using value_type = Real;
  using NodePtr = std::shared_ptr<detail::Node<Real>>;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, Real fill = Real(0));
  BasicTensor(Shape shape, std::vector<Real> values);

  static BasicTensor scalar(Real value);
  static BasicTensor from(std::initializer_list<Real> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  Index dim(std::size_t axis) const;
  Index numel() const;

  std::span<const Real> data() const;
  std::span<Real> mutable_data();
  Real item() const;
  Real at(Index flat) const;

  bool requires_grad() const;
  BasicTensor& set_requires_grad(bool value = true);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const Real> grad() const;
  std::span<Real> mutable_grad();
  void zero_grad();

  /// New leaf holding a copy of the values, outside any tape.
  BasicTensor detach() const;
  /// Deep copy keeping requires_grad; the copy is a leaf.
  BasicTensor clone() const;

  /// Populates gradients of every reachable leaf that requires grad.
  /// Gradients accumulate; clear them with zero_grad between steps.
  void backward() const;

  const NodePtr& node() const { return node_; }

  /// Builds an op result. The backward closure and parents are kept only
  /// when grad mode is on and some parent requires grad.
  static BasicTensor make_result(Shape shape, std::vector<Real> data,
                                 const char* op,
                                 std::vector<BasicTensor> parents,
                                 std::function<void(detail::Node<Real>&)> backward);

 private:
  explicit BasicTensor(NodePtr node) : node_(std::move(node)) {}
  void require_defined() const;

  NodePtr node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace nsx
