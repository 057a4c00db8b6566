#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sgim::ad {

/// Dense row-major array of 64-bit floats.
///
/// Construction rejects NaN/Inf, so a non-finite value can never enter a
/// graph silently. Every differentiable op works on rank-2 arrays; scalars
/// are 1x1 and vectors are 1xn rows.
class Array {
 public:
  Array() = default;
  Array(std::vector<std::size_t> shape, std::vector<double> data);

  static Array zeros(std::size_t rows, std::size_t cols);
  static Array filled(std::size_t rows, std::size_t cols, double v);
  static Array scalar(double v) { return filled(1, 1, v); }
  static Array from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Array row(std::span<const double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return data_; }
  // Callers are responsible for keeping written entries finite.
  std::span<double> mutable_data() { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double item() const;

  std::span<const double> row_span(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols(), cols());
  }

  bool same_shape(const Array& other) const { return shape_ == other.shape_; }
  bool operator==(const Array& other) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

struct Node;
using BackwardFn = std::function<void(Node&)>;

struct Node {
  Array value;
  Array grad;  // allocated by backward()
  std::string op;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
  bool requires_grad = false;

  // Adds g into grad, allocating zeros on first touch.
  void accumulate(std::span<const double> g);
};

/// Handle to a graph node. Graphs are rebuilt for every evaluation.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Array& value() const { return node_->value; }
  const Array& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& op() const { return node_->op; }
  double item() const { return node_->value.item(); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Leaf that never receives a gradient (frozen weights, targets, data).
Var constant(Array value);
/// Leaf whose gradient is populated by backward().
Var parameter(Array value);

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
/// a (m x n) plus the row vector r (1 x n) added to every row.
Var add_row(const Var& a, const Var& r);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
Var max_with_zero(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
Var row_sums(const Var& a);
Var transpose(const Var& a);
/// Same row-major data viewed as rows x cols.
Var reshape(const Var& a, std::size_t rows, std::size_t cols);
Var slice_rows(const Var& a, std::size_t begin, std::size_t count);
Var concat_rows(std::span<const Var> parts);
Var diagonal(const Var& a);

/// Softmax of each row of a / temperature, computed with row-max subtraction.
Var row_softmax(const Var& a, double temperature);
/// Euclidean norm of each row (m x 1). The gradient at a zero row is the
/// zero subgradient.
Var row_norms(const Var& a);
/// Each row scaled to unit Euclidean norm; a zero row is an error.
Var l2_normalize_rows(const Var& a);

/// Reverse sweep from a scalar root. Gradients of every reachable node that
/// requires one are reset and recomputed, so repeated calls are idempotent.
void backward(const Var& root);

/// Max over coordinates of |analytic - central| / (|central| + 1e-8), where
/// the analytic gradient comes from backward() on f(parameter(x)).
double finite_difference_check(const std::function<Var(const Var&)>& f, const Array& x,
                               double eps);

}  // namespace sgim::ad
