#include "sgim/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "sgim/errors.hpp"

namespace sgim::ad {

// ---------------------------------------------------------------------------
// Array

Array::Array(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t expected = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                                               std::multiplies<>());
  if (expected != data_.size()) {
    throw DimensionError("array data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in array " + shape_string(shape_));
  }
}

Array Array::zeros(std::size_t rows, std::size_t cols) { return filled(rows, cols, 0.0); }

Array Array::filled(std::size_t rows, std::size_t cols, double v) {
  return Array({rows, cols}, std::vector<double>(rows * cols, v));
}

Array Array::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged rows in Array::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Array({r, c}, std::move(data));
}

Array Array::row(std::span<const double> values) {
  return Array({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Array::rows() const {
  if (shape_.size() != 2) throw DimensionError("expected rank-2 array, got " + shape_string(shape_));
  return shape_[0];
}

std::size_t Array::cols() const {
  if (shape_.size() != 2) throw DimensionError("expected rank-2 array, got " + shape_string(shape_));
  return shape_[1];
}

double Array::item() const {
  if (data_.size() != 1) throw UsageError("item() on non-scalar array " + shape_string(shape_));
  return data_[0];
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

void Node::accumulate(std::span<const double> g) {
  if (grad.size() != value.size()) {
    grad = Array(value.shape(), std::vector<double>(value.size(), 0.0));
  }
  auto out = grad.mutable_data();
  for (std::size_t i = 0; i < g.size(); ++i) out[i] += g[i];
}

// ---------------------------------------------------------------------------
// Graph construction helpers

namespace {

Var make_leaf(Array value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = requires_grad ? "parameter" : "constant";
  n->requires_grad = requires_grad;
  return Var(std::move(n));
}

Var make_node(Array value, std::string op, std::vector<Var> parents, BackwardFn fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = std::move(op);
  for (const auto& p : parents) {
    n->requires_grad = n->requires_grad || p.requires_grad();
    n->parents.push_back(p.node());
  }
  if (n->requires_grad) n->backward = std::move(fn);
  return Var(std::move(n));
}

void require_rank2(const Var& a, const char* op) {
  if (a.value().rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 input, got " +
                         shape_string(a.value().shape()));
  }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.value().shape()) +
                         " vs " + shape_string(b.value().shape()));
  }
}

Array mat(std::size_t r, std::size_t c, std::vector<double> d) {
  return Array({r, c}, std::move(d));
}

// out (m x n) = A (m x k) * B (k x n), optionally with either side transposed.
std::vector<double> gemm(std::span<const double> a, std::span<const double> b, std::size_t m,
                         std::size_t k, std::size_t n, bool trans_a, bool trans_b) {
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = trans_a ? a[p * m + i] : a[i * k + p];
      if (av == 0.0) continue;
      double* orow = out.data() + i * n;
      if (trans_b) {
        for (std::size_t j = 0; j < n; ++j) orow[j] += av * b[j * k + p];
      } else {
        const double* brow = b.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  }
  return out;
}

template <typename F>
Var unary(const Var& a, const char* op, F&& fwd, std::function<double(double, double)> dydx) {
  require_rank2(a, op);
  const auto& x = a.value();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  Array value(x.shape(), std::move(y));
  return make_node(std::move(value), op, {a}, [dydx](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    std::vector<double> g(self.value.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = self.grad[i] * dydx(p.value[i], self.value[i]);
    }
    p.accumulate(g);
  });
}

}  // namespace

Var constant(Array value) { return make_leaf(std::move(value), false); }
Var parameter(Array value) { return make_leaf(std::move(value), true); }

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(const Var& a, const Var& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.value().rows(), k = a.value().cols(), n = b.value().cols();
  if (b.value().rows() != k) {
    throw DimensionError("matmul: inner dimensions disagree " + shape_string(a.value().shape()) +
                         " x " + shape_string(b.value().shape()));
  }
  auto out = gemm(a.value().data(), b.value().data(), m, k, n, false, false);
  return make_node(mat(m, n, std::move(out)), "matmul", {a, b}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) pa.accumulate(gemm(self.grad.data(), pb.value.data(), m, n, k, false, true));
    if (pb.requires_grad) pb.accumulate(gemm(pa.value.data(), self.grad.data(), k, m, n, true, false));
  });
}

Var transpose(const Var& a) {
  require_rank2(a, "transpose");
  const std::size_t r = a.value().rows(), c = a.value().cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.value().at(i, j);
  return make_node(mat(c, r, std::move(out)), "transpose", {a}, [r, c](Node& self) {
    Node& p = *self.parents[0];
    std::vector<double> g(r * c);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] = self.grad[j * r + i];
    p.accumulate(g);
  });
}

Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.value().size()) {
    throw DimensionError("reshape: " + shape_string(a.value().shape()) + " has " +
                         std::to_string(a.value().size()) + " entries, not " + std::to_string(rows * cols));
  }
  auto d = a.value().data();
  return make_node(mat(rows, cols, std::vector<double>(d.begin(), d.end())), "reshape", {a},
                   [](Node& self) { self.parents[0]->accumulate(self.grad.data()); });
}

// ---------------------------------------------------------------------------
// Elementwise

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  std::vector<double> y(a.value().size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
  return make_node(Array(a.value().shape(), std::move(y)), "add", {a, b}, [](Node& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) p->accumulate(self.grad.data());
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> y(a.value().size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] - b.value()[i];
  return make_node(Array(a.value().shape(), std::move(y)), "sub", {a, b}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad.data());
    if (self.parents[1]->requires_grad) {
      std::vector<double> g(self.grad.data().begin(), self.grad.data().end());
      for (double& v : g) v = -v;
      self.parents[1]->accumulate(g);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> y(a.value().size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
  return make_node(Array(a.value().shape(), std::move(y)), "mul", {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const std::size_t n = self.value.size();
    if (pa.requires_grad) {
      std::vector<double> g(n);
      for (std::size_t i = 0; i < n; ++i) g[i] = self.grad[i] * pb.value[i];
      pa.accumulate(g);
    }
    if (pb.requires_grad) {
      std::vector<double> g(n);
      for (std::size_t i = 0; i < n; ++i) g[i] = self.grad[i] * pa.value[i];
      pb.accumulate(g);
    }
  });
}

Var add_row(const Var& a, const Var& r) {
  require_rank2(a, "add_row");
  require_rank2(r, "add_row");
  const std::size_t m = a.value().rows(), n = a.value().cols();
  if (r.value().rows() != 1 || r.value().cols() != n) {
    throw DimensionError("add_row: row vector " + shape_string(r.value().shape()) +
                         " does not fit " + shape_string(a.value().shape()));
  }
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = a.value()[i * n + j] + r.value()[j];
  return make_node(mat(m, n, std::move(y)), "add_row", {a, r}, [m, n](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad.data());
    if (self.parents[1]->requires_grad) {
      std::vector<double> g(n, 0.0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
      self.parents[1]->accumulate(g);
    }
  });
}

Var scale(const Var& a, double c) {
  return unary(a, "scale", [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_scalar(const Var& a, double c) {
  return unary(a, "add_scalar", [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var exp(const Var& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw ParameterError("log: non-positive input " + std::to_string(v));
  }
  return unary(a, "log", [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Var tanh(const Var& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var max_with_zero(const Var& a) {
  return unary(a, "max_with_zero", [](double x) { return std::max(x, 0.0); },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Reductions and reshaping

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return make_node(Array::scalar(s), "sum", {a}, [](Node& self) {
    Node& p = *self.parents[0];
    p.accumulate(std::vector<double>(p.value.size(), self.grad[0]));
  });
}

Var mean(const Var& a) {
  const auto n = static_cast<double>(a.value().size());
  if (a.value().size() == 0) throw UsageError("mean of empty array");
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return make_node(Array::scalar(s / n), "mean", {a}, [n](Node& self) {
    Node& p = *self.parents[0];
    p.accumulate(std::vector<double>(p.value.size(), self.grad[0] / n));
  });
}

Var row_sums(const Var& a) {
  require_rank2(a, "row_sums");
  const std::size_t m = a.value().rows(), n = a.value().cols();
  std::vector<double> y(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i] += a.value()[i * n + j];
  return make_node(mat(m, 1, std::move(y)), "row_sums", {a}, [m, n](Node& self) {
    std::vector<double> g(m * n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] = self.grad[i];
    self.parents[0]->accumulate(g);
  });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t count) {
  require_rank2(a, "slice_rows");
  const std::size_t m = a.value().rows(), n = a.value().cols();
  if (begin + count > m || count == 0) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + std::to_string(m) + " rows");
  }
  auto src = a.value().data().subspan(begin * n, count * n);
  return make_node(mat(count, n, {src.begin(), src.end()}), "slice_rows", {a},
                   [begin, n](Node& self) {
                     Node& p = *self.parents[0];
                     std::vector<double> g(p.value.size(), 0.0);
                     std::copy(self.grad.data().begin(), self.grad.data().end(),
                               g.begin() + static_cast<std::ptrdiff_t>(begin * n));
                     p.accumulate(g);
                   });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat_rows: no inputs");
  const std::size_t n = parts[0].value().cols();
  std::size_t m = 0;
  std::vector<double> y;
  for (const auto& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.value().cols() != n) throw DimensionError("concat_rows: column counts differ");
    m += p.value().rows();
    y.insert(y.end(), p.value().data().begin(), p.value().data().end());
  }
  return make_node(mat(m, n, std::move(y)), "concat_rows", {parts.begin(), parts.end()},
                   [](Node& self) {
                     std::size_t offset = 0;
                     for (auto& p : self.parents) {
                       const std::size_t len = p->value.size();
                       if (p->requires_grad) p->accumulate(self.grad.data().subspan(offset, len));
                       offset += len;
                     }
                   });
}

Var diagonal(const Var& a) {
  require_rank2(a, "diagonal");
  const std::size_t n = a.value().rows();
  if (a.value().cols() != n) throw DimensionError("diagonal: matrix is not square");
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = a.value().at(i, i);
  return make_node(mat(n, 1, std::move(y)), "diagonal", {a}, [n](Node& self) {
    std::vector<double> g(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) g[i * n + i] = self.grad[i];
    self.parents[0]->accumulate(g);
  });
}

// ---------------------------------------------------------------------------
// Row-wise normalizations

Var row_softmax(const Var& a, double temperature) {
  require_rank2(a, "row_softmax");
  if (!(temperature > 0.0)) {
    throw ParameterError("row_softmax: temperature must be positive, got " +
                         std::to_string(temperature));
  }
  const std::size_t m = a.value().rows(), n = a.value().cols();
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    auto row = a.value().row_span(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[i * n + j] = std::exp((row[j] - mx) / temperature);
      z += y[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= z;
  }
  return make_node(mat(m, n, std::move(y)), "row_softmax", {a}, [m, n, temperature](Node& self) {
    std::vector<double> g(m * n);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += self.grad[i * n + j] * self.value[i * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        g[i * n + j] = self.value[i * n + j] * (self.grad[i * n + j] - dot) / temperature;
      }
    }
    self.parents[0]->accumulate(g);
  });
}

Var row_norms(const Var& a) {
  require_rank2(a, "row_norms");
  const std::size_t m = a.value().rows(), n = a.value().cols();
  std::vector<double> y(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (double v : a.value().row_span(i)) y[i] += v * v;
    y[i] = std::sqrt(y[i]);
  }
  return make_node(mat(m, 1, std::move(y)), "row_norms", {a}, [m, n](Node& self) {
    const Array& x = self.parents[0]->value;
    std::vector<double> g(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double norm = self.value[i];
      if (norm == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] = self.grad[i] * x[i * n + j] / norm;
    }
    self.parents[0]->accumulate(g);
  });
}

Var l2_normalize_rows(const Var& a) {
  require_rank2(a, "l2_normalize_rows");
  const std::size_t m = a.value().rows(), n = a.value().cols();
  std::vector<double> norms(m, 0.0);
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (double v : a.value().row_span(i)) norms[i] += v * v;
    norms[i] = std::sqrt(norms[i]);
    if (norms[i] == 0.0) {
      throw DegenerateInputError("l2_normalize_rows: row " + std::to_string(i) + " has zero norm");
    }
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = a.value()[i * n + j] / norms[i];
  }
  return make_node(mat(m, n, std::move(y)), "l2_normalize_rows", {a},
                   [m, n, norms = std::move(norms)](Node& self) {
                     std::vector<double> g(m * n);
                     for (std::size_t i = 0; i < m; ++i) {
                       double dot = 0.0;
                       for (std::size_t j = 0; j < n; ++j)
                         dot += self.grad[i * n + j] * self.value[i * n + j];
                       for (std::size_t j = 0; j < n; ++j) {
                         g[i * n + j] = (self.grad[i * n + j] - self.value[i * n + j] * dot) / norms[i];
                       }
                     }
                     self.parents[0]->accumulate(g);
                   });
}

// ---------------------------------------------------------------------------
// Reverse sweep

void backward(const Var& root) {
  if (root.value().size() != 1) {
    throw UsageError("backward: root must be scalar, got " + shape_string(root.value().shape()));
  }
  // Iterative post-order DFS; parents are visited in their stored order, so
  // the resulting topological order is a pure function of the graph.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) n->grad = Array(n->value.shape(), std::vector<double>(n->value.size(), 0.0));
  if (!root.requires_grad()) return;
  root.node()->grad = Array(root.value().shape(), {1.0});
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

double finite_difference_check(const std::function<Var(const Var&)>& f, const Array& x,
                               double eps) {
  Var xv = parameter(x);
  Var y = f(xv);
  backward(y);
  const Array analytic = xv.grad();

  double worst = 0.0;
  std::vector<double> probe(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = f(constant(Array(x.shape(), probe))).item();
    probe[i] = orig - eps;
    const double down = f(constant(Array(x.shape(), probe))).item();
    probe[i] = orig;
    const double central = (up - down) / (2.0 * eps);
    const double err = std::abs(analytic[i] - central) / (std::abs(central) + 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace sgim::ad
