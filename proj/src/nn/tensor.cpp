#include "sonarfit/nn/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "sonarfit/error.hpp"

namespace sonarfit::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Array::Array(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Array::Array(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(values.begin(), values.end()) {
  require(data_.size() == shape_size(shape_),
          "Array: " + std::to_string(data_.size()) + " values do not fit shape " +
              shape_string(shape_));
}

void Array::reshape(Shape shape) {
  require(shape_size(shape) == data_.size(),
          "Array::reshape: " + shape_string(shape_) + " -> " + shape_string(shape));
  shape_ = std::move(shape);
}

void Array::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

namespace detail {

Array* Node::parent_grad(std::size_t i) {
  Node& p = *parents[i];
  if (!p.requires_grad) return nullptr;
  if (p.grad.empty() && p.value.size() > 0) p.grad = Array(p.value.shape(), 0.0);
  return &p.grad;
}

}  // namespace detail

Tensor Tensor::constant(Array value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

Tensor Tensor::leaf(Array value, bool requires_grad) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

const Array& Tensor::value() const {
  require(defined(), "Tensor: undefined tensor");
  return node_->value;
}

Array& Tensor::mutable_value() {
  require(defined(), "Tensor: undefined tensor");
  return node_->value;
}

double Tensor::item() const {
  require(size() == 1, "Tensor::item: tensor has " + std::to_string(size()) + " elements");
  return value()[0];
}

bool Tensor::requires_grad() const { return defined() && node_->requires_grad; }
bool Tensor::has_grad() const { return defined() && !node_->grad.empty(); }

const Array& Tensor::grad() const {
  require(has_grad(), "Tensor::grad: no gradient recorded");
  return node_->grad;
}

void Tensor::zero_grad() {
  require(defined(), "Tensor: undefined tensor");
  node_->grad = Array(node_->value.shape(), 0.0);
}

void Tensor::clear_grad() {
  if (defined()) node_->grad = Array();
}

void Tensor::backward() const {
  require(defined(), "backward: undefined tensor");
  require(size() == 1, "backward: output must be a scalar, got shape " + shape_string(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the subgraph.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && !visited.contains(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  if (node_->grad.empty()) node_->grad = Array(node_->value.shape(), 0.0);
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  for (detail::Node* n : order) {
    if (!n->is_leaf) {
      n->parents.clear();
      n->backward = nullptr;
      if (n != node_.get()) n->grad = Array();
    }
  }
}

Tensor make_result(Array value, const std::vector<Tensor>& inputs,
                   std::function<void(detail::Node&)> backward) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->is_leaf = false;
  if (g_grad_enabled) {
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      for (const auto& t : inputs) node->parents.push_back(t.node());
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

bool grad_enabled() { return g_grad_enabled; }

namespace {
thread_local BranchTrace* g_branch_trace = nullptr;
}

BranchTrace::BranchTrace() : digest_(14695981039346656037ull), previous_(g_branch_trace) {
  g_branch_trace = this;
}
BranchTrace::~BranchTrace() { g_branch_trace = previous_; }

BranchTrace* active_branch_trace() { return g_branch_trace; }

void trace_branch(BranchTrace* trace, std::uint64_t decision) {
  trace->digest_ = (trace->digest_ ^ decision) * 1099511628211ull;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace sonarfit::nn
