#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace sonarfit::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Cache-line aligned storage. Vectorized kernels peel loops according to the
/// address alignment, so unaligned buffers could change summation order from
/// run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

/// Dense row-major float64 array.
class Array {
 public:
  Array() = default;
  explicit Array(Shape shape, double fill = 0.0);
  Array(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  void reshape(Shape shape);
  void fill(double v);

 private:
  Shape shape_;
  std::vector<double, AlignedAllocator<double>> data_;
};

class Tensor;

namespace detail {

struct Node {
  Array value;
  Array grad;  // allocated on first accumulation
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  /// Gradient slot of parent `i`, allocated as zeros on demand; nullptr when
  /// that parent does not take part in differentiation.
  Array* parent_grad(std::size_t i);
  const Array& parent_value(std::size_t i) const { return parents[i]->value; }
};

}  // namespace detail

/// Handle to a node of the dynamic computation graph. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  /// Value that never receives gradients.
  static Tensor constant(Array value);
  /// Graph leaf; accumulates gradients across backward passes when
  /// `requires_grad` is set.
  static Tensor leaf(Array value, bool requires_grad = true);

  bool defined() const { return static_cast<bool>(node_); }
  const Array& value() const;
  Array& mutable_value();
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  double item() const;

  bool requires_grad() const;
  bool has_grad() const;
  const Array& grad() const;
  /// Sets the gradient buffer to zeros of the value's shape.
  void zero_grad();
  /// Releases the gradient buffer.
  void clear_grad();

  /// Reverse sweep from this scalar. Gradients accumulate into leaves; the
  /// recorded graph behind this tensor is released afterwards.
  void backward() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor make_result(Array, const std::vector<Tensor>&, std::function<void(detail::Node&)>);

  std::shared_ptr<detail::Node> node_;
};

/// Records an op output. The backward closure receives the output node, whose
/// `grad` holds dL/d(output), and accumulates into `parent_grad(i)`.
Tensor make_result(Array value, const std::vector<Tensor>& inputs,
                   std::function<void(detail::Node&)> backward);

bool grad_enabled();

/// While alive, piecewise ops (leaky ReLU, abs, max pool, top-k, median)
/// fold every branch they take into a digest on this thread. Two
/// evaluations with equal digests lie on the same smooth piece.
class BranchTrace {
 public:
  BranchTrace();
  ~BranchTrace();
  BranchTrace(const BranchTrace&) = delete;
  BranchTrace& operator=(const BranchTrace&) = delete;

  std::uint64_t digest() const { return digest_; }

 private:
  std::uint64_t digest_;
  BranchTrace* previous_;
  friend BranchTrace* active_branch_trace();
  friend void trace_branch(BranchTrace*, std::uint64_t);
};

/// nullptr unless a BranchTrace is alive on this thread.
BranchTrace* active_branch_trace();
void trace_branch(BranchTrace* trace, std::uint64_t decision);

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace sonarfit::nn
