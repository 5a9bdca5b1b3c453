#include "advsr/grad.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "advsr/error.h"

namespace advsr::grad {

std::string Shape::str() const {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

Matrix::Matrix(Shape s, std::vector<double> d) : shape(s), data(std::move(d)) {
  if (data.size() != shape.size()) {
    throw ShapeError("matrix data length " + std::to_string(data.size()) +
                     " does not match shape " + shape.str());
  }
}

Matrix Matrix::zeros(std::size_t rows, std::size_t cols) {
  return Matrix(Shape{rows, cols}, std::vector<double>(rows * cols, 0.0));
}

// ---------------------------------------------------------------------------
// Tensor

const Shape& Tensor::shape() const { return tape_->shape(id_); }
std::span<const double> Tensor::value() const { return tape_->value(id_); }
std::span<const double> Tensor::grad() const { return tape_->grad(id_); }
bool Tensor::requires_grad() const { return tape_->requires_grad(id_); }

double Tensor::item() const {
  if (shape().size() != 1) throw ContractError("item() on non-scalar " + shape().str());
  return value()[0];
}

Matrix Tensor::matrix() const {
  const auto v = value();
  return Matrix(shape(), std::vector<double>(v.begin(), v.end()));
}

// ---------------------------------------------------------------------------
// Tape

Tensor Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::leaf(Matrix m, bool requires_grad) {
  Node n;
  n.shape = m.shape;
  n.owned = std::move(m.data);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Tensor Tape::leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  return leaf(Matrix(shape, std::move(data)), requires_grad);
}

Tensor Tape::constant_view(Shape shape, std::span<const double> data) {
  if (data.size() != shape.size()) {
    throw ShapeError("constant_view: data length does not match " + shape.str());
  }
  Node n;
  n.shape = shape;
  n.borrowed = data.data();
  return push(std::move(n));
}

Tensor Tape::record(const char* op, Shape shape, std::vector<double> value,
                    std::initializer_list<Tensor> parents, BackwardFn backward) {
  return record(op, shape, std::move(value),
                std::span<const Tensor>(parents.begin(), parents.size()),
                std::move(backward));
}

Tensor Tape::record(const char* op, Shape shape, std::vector<double> value,
                    std::span<const Tensor> parents, BackwardFn backward) {
  if (value.size() != shape.size()) {
    throw ShapeError(std::string(op) + ": value length does not match " + shape.str());
  }
  for (double v : value) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite result");
  }
  Node n;
  n.shape = shape;
  n.owned = std::move(value);
  n.is_leaf = false;
  for (const Tensor& p : parents) {
    if (p.tape_ != this) throw ContractError(std::string(op) + ": operand from another tape");
    n.requires_grad = n.requires_grad || nodes_[p.id_].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

std::span<const double> Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.borrowed) return {n.borrowed, n.shape.size()};
  return n.owned;
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.shape.size(), 0.0);
  return n.grad;
}

void Tape::backward(Tensor loss) {
  if (loss.tape_ != this) throw ContractError("backward: loss from another tape");
  if (consumed_) throw ContractError("backward: tape already consumed");
  if (nodes_[loss.id_].shape.size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + nodes_[loss.id_].shape.str());
  }
  consumed_ = true;
  if (nodes_[loss.id_].requires_grad) {
    grad_buffer(loss.id_)[0] += 1.0;
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && !n.grad.empty()) n.backward(*this, i);
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    n.backward = nullptr;
    if (n.is_leaf && n.requires_grad) grad_buffer(i);
  }
}

// ---------------------------------------------------------------------------
// Ops

namespace {

void check_same_tape(const Tensor& a, const Tensor& b, const char* op) {
  if (&a.tape() != &b.tape()) throw ContractError(std::string(op) + ": operands on different tapes");
}

enum class Bcast { kNone, kLeftScalar, kRightScalar };

Bcast elementwise_mode(const Tensor& a, const Tensor& b, const char* op) {
  check_same_tape(a, b, op);
  if (a.shape() == b.shape()) return Bcast::kNone;
  if (a.shape().size() == 1) return Bcast::kLeftScalar;
  if (b.shape().size() == 1) return Bcast::kRightScalar;
  throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                   b.shape().str());
}

template <typename F>
std::vector<double> map_values(std::span<const double> v, F f) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = f(v[i]);
  return out;
}

// Sums dy into a parent that may have been broadcast as a scalar.
void accumulate(Tape& t, std::size_t parent, bool parent_is_scalar_bcast,
                std::span<const double> contrib) {
  auto g = t.grad_buffer(parent);
  if (parent_is_scalar_bcast) {
    double s = 0.0;
    for (double c : contrib) s += c;
    g[0] += s;
  } else {
    for (std::size_t i = 0; i < contrib.size(); ++i) g[i] += contrib[i];
  }
}

}  // namespace

Tensor add(Tensor a, Tensor b) {
  const Bcast mode = elementwise_mode(a, b, "add");
  const Shape out = mode == Bcast::kLeftScalar ? b.shape() : a.shape();
  const auto av = a.value(), bv = b.value();
  std::vector<double> v(out.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = av[mode == Bcast::kLeftScalar ? 0 : i] + bv[mode == Bcast::kRightScalar ? 0 : i];
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("add", out, std::move(v), {a, b}, [=](Tape& t, std::size_t self) {
    const auto dy = t.grad(self);
    if (t.requires_grad(ia)) accumulate(t, ia, mode == Bcast::kLeftScalar, dy);
    if (t.requires_grad(ib)) accumulate(t, ib, mode == Bcast::kRightScalar, dy);
  });
}

Tensor sub(Tensor a, Tensor b) {
  const Bcast mode = elementwise_mode(a, b, "sub");
  const Shape out = mode == Bcast::kLeftScalar ? b.shape() : a.shape();
  const auto av = a.value(), bv = b.value();
  std::vector<double> v(out.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = av[mode == Bcast::kLeftScalar ? 0 : i] - bv[mode == Bcast::kRightScalar ? 0 : i];
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("sub", out, std::move(v), {a, b}, [=](Tape& t, std::size_t self) {
    const auto dy = t.grad(self);
    if (t.requires_grad(ia)) accumulate(t, ia, mode == Bcast::kLeftScalar, dy);
    if (t.requires_grad(ib)) {
      std::vector<double> neg(dy.size());
      for (std::size_t i = 0; i < dy.size(); ++i) neg[i] = -dy[i];
      accumulate(t, ib, mode == Bcast::kRightScalar, neg);
    }
  });
}

Tensor mul(Tensor a, Tensor b) {
  const Bcast mode = elementwise_mode(a, b, "mul");
  const Shape out = mode == Bcast::kLeftScalar ? b.shape() : a.shape();
  const auto av = a.value(), bv = b.value();
  std::vector<double> v(out.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = av[mode == Bcast::kLeftScalar ? 0 : i] * bv[mode == Bcast::kRightScalar ? 0 : i];
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("mul", out, std::move(v), {a, b}, [=](Tape& t, std::size_t self) {
    const auto dy = t.grad(self);
    const auto av = t.value(ia), bv = t.value(ib);
    std::vector<double> c(dy.size());
    if (t.requires_grad(ia)) {
      for (std::size_t i = 0; i < dy.size(); ++i) {
        c[i] = dy[i] * bv[mode == Bcast::kRightScalar ? 0 : i];
      }
      accumulate(t, ia, mode == Bcast::kLeftScalar, c);
    }
    if (t.requires_grad(ib)) {
      for (std::size_t i = 0; i < dy.size(); ++i) {
        c[i] = dy[i] * av[mode == Bcast::kLeftScalar ? 0 : i];
      }
      accumulate(t, ib, mode == Bcast::kRightScalar, c);
    }
  });
}

Tensor scale(Tensor a, double c) {
  auto v = map_values(a.value(), [c](double x) { return c * x; });
  const std::size_t ia = a.id();
  return a.tape().record("scale", a.shape(), std::move(v), {a}, [=](Tape& t, std::size_t self) {
    const auto dy = t.grad(self);
    auto g = t.grad_buffer(ia);
    for (std::size_t i = 0; i < dy.size(); ++i) g[i] += c * dy[i];
  });
}

Tensor add_scalar(Tensor a, double c) {
  auto v = map_values(a.value(), [c](double x) { return x + c; });
  const std::size_t ia = a.id();
  return a.tape().record("add_scalar", a.shape(), std::move(v), {a},
                         [=](Tape& t, std::size_t self) {
                           const auto dy = t.grad(self);
                           auto g = t.grad_buffer(ia);
                           for (std::size_t i = 0; i < dy.size(); ++i) g[i] += dy[i];
                         });
}

Tensor matmul(Tensor a, Tensor b) {
  check_same_tape(a, b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: " + a.shape().str() + " x " + b.shape().str());
  }
  const auto av = a.value(), bv = b.value();
  std::vector<double> v(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* out = &v[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv[p * n];
      for (std::size_t j = 0; j < n; ++j) out[j] += aip * brow[j];
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("matmul", Shape{m, n}, std::move(v), {a, b},
                         [=](Tape& t, std::size_t self) {
    const auto dy = t.grad(self);
    const auto av = t.value(ia), bv = t.value(ib);
    if (t.requires_grad(ia)) {
      auto ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < m; ++i) {
        const double* dyrow = &dy[i * n];
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = &bv[p * n];
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += dyrow[j] * brow[j];
          ga[i * k + p] += s;
        }
      }
    }
    if (t.requires_grad(ib)) {
      auto gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < m; ++i) {
        const double* dyrow = &dy[i * n];
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          if (aip == 0.0) continue;
          double* grow = &gb[p * n];
          for (std::size_t j = 0; j < n; ++j) grow[j] += aip * dyrow[j];
        }
      }
    }
  });
}

Tensor tanh(Tensor a) {
  auto v = map_values(a.value(), [](double x) { return std::tanh(x); });
  const std::size_t ia = a.id();
  return a.tape().record("tanh", a.shape(), std::move(v), {a}, [=](Tape& t, std::size_t self) {
    const auto dy = t.grad(self);
    const auto y = t.value(self);
    auto g = t.grad_buffer(ia);
    for (std::size_t i = 0; i < dy.size(); ++i) g[i] += dy[i] * (1.0 - y[i] * y[i]);
  });
}

Tensor relu(Tensor a) {
  auto v = map_values(a.value(), [](double x) { return x > 0.0 ? x : 0.0; });
  const std::size_t ia = a.id();
  return a.tape().record("relu", a.shape(), std::move(v), {a}, [=](Tape& t, std::size_t self) {
    const auto dy = t.grad(self);
    const auto x = t.value(ia);
    auto g = t.grad_buffer(ia);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (x[i] > 0.0) g[i] += dy[i];
    }
  });
}

Tensor exp(Tensor a) {
  auto v = map_values(a.value(), [](double x) { return std::exp(x); });
  const std::size_t ia = a.id();
  return a.tape().record("exp", a.shape(), std::move(v), {a}, [=](Tape& t, std::size_t self) {
    const auto dy = t.grad(self);
    const auto y = t.value(self);
    auto g = t.grad_buffer(ia);
    for (std::size_t i = 0; i < dy.size(); ++i) g[i] += dy[i] * y[i];
  });
}

Tensor log(Tensor a) {
  for (double x : a.value()) {
    if (!(x > 0.0)) throw NumericError("log: non-positive input");
  }
  auto v = map_values(a.value(), [](double x) { return std::log(x); });
  const std::size_t ia = a.id();
  return a.tape().record("log", a.shape(), std::move(v), {a}, [=](Tape& t, std::size_t self) {
    const auto dy = t.grad(self);
    const auto x = t.value(ia);
    auto g = t.grad_buffer(ia);
    for (std::size_t i = 0; i < dy.size(); ++i) g[i] += dy[i] / x[i];
  });
}

Tensor sum(Tensor a) {
  double s = 0.0;
  for (double x : a.value()) s += x;
  const std::size_t ia = a.id();
  return a.tape().record("sum", Shape{1, 1}, {s}, {a}, [=](Tape& t, std::size_t self) {
    const double dy = t.grad(self)[0];
    auto g = t.grad_buffer(ia);
    for (double& gi : g) gi += dy;
  });
}

Tensor mean(Tensor a) {
  const double n = static_cast<double>(a.shape().size());
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / n);
}

Tensor slice_rows(Tensor a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.rows()) {
    throw ShapeError("slice_rows [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") of " + a.shape().str());
  }
  const std::size_t c = a.cols();
  const auto av = a.value();
  std::vector<double> v(av.begin() + static_cast<long>(begin * c),
                        av.begin() + static_cast<long>(end * c));
  const std::size_t ia = a.id();
  return a.tape().record("slice_rows", Shape{end - begin, c}, std::move(v), {a},
                         [=](Tape& t, std::size_t self) {
                           const auto dy = t.grad(self);
                           auto g = t.grad_buffer(ia);
                           for (std::size_t i = 0; i < dy.size(); ++i) g[begin * c + i] += dy[i];
                         });
}

Tensor slice_cols(Tensor a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols()) {
    throw ShapeError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") of " + a.shape().str());
  }
  const std::size_t r = a.rows(), c = a.cols(), w = end - begin;
  const auto av = a.value();
  std::vector<double> v(r * w);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < w; ++j) v[i * w + j] = av[i * c + begin + j];
  }
  const std::size_t ia = a.id();
  return a.tape().record("slice_cols", Shape{r, w}, std::move(v), {a},
                         [=](Tape& t, std::size_t self) {
                           const auto dy = t.grad(self);
                           auto g = t.grad_buffer(ia);
                           for (std::size_t i = 0; i < r; ++i) {
                             for (std::size_t j = 0; j < w; ++j) {
                               g[i * c + begin + j] += dy[i * w + j];
                             }
                           }
                         });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  const std::size_t c = parts[0].cols();
  std::size_t r = 0;
  std::vector<double> v;
  std::vector<std::size_t> ids, offsets;
  for (const Tensor& p : parts) {
    check_same_tape(parts[0], p, "concat_rows");
    if (p.cols() != c) throw ShapeError("concat_rows: column mismatch");
    offsets.push_back(v.size());
    ids.push_back(p.id());
    const auto pv = p.value();
    v.insert(v.end(), pv.begin(), pv.end());
    r += p.rows();
  }
  return parts[0].tape().record("concat_rows", Shape{r, c}, std::move(v), parts,
                                [=](Tape& t, std::size_t self) {
    const auto dy = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      auto g = t.grad_buffer(ids[k]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[offsets[k] + i];
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const std::size_t r = parts[0].rows();
  std::size_t c = 0;
  std::vector<std::size_t> ids, widths, col0;
  for (const Tensor& p : parts) {
    check_same_tape(parts[0], p, "concat_cols");
    if (p.rows() != r) throw ShapeError("concat_cols: row mismatch");
    ids.push_back(p.id());
    widths.push_back(p.cols());
    col0.push_back(c);
    c += p.cols();
  }
  std::vector<double> v(r * c);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pv = parts[k].value();
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(&pv[i * widths[k]], widths[k], &v[i * c + col0[k]]);
    }
  }
  return parts[0].tape().record("concat_cols", Shape{r, c}, std::move(v), parts,
                                [=](Tape& t, std::size_t self) {
    const auto dy = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      auto g = t.grad_buffer(ids[k]);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += dy[i * c + col0[k] + j];
      }
    }
  });
}

Tensor log_softmax(Tensor a, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError("log_softmax: axis must be 0 or 1");
  const std::size_t r = a.rows(), c = a.cols();
  // View the reduced axis as contiguous "groups" of `len` entries at `stride`.
  const std::size_t groups = axis == 1 ? r : c;
  const std::size_t len = axis == 1 ? c : r;
  const auto idx = [=](std::size_t g, std::size_t k) {
    return axis == 1 ? g * c + k : k * c + g;
  };
  const auto av = a.value();
  std::vector<double> v(av.size());
  for (std::size_t g = 0; g < groups; ++g) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, av[idx(g, k)]);
    double s = 0.0;
    for (std::size_t k = 0; k < len; ++k) s += std::exp(av[idx(g, k)] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t k = 0; k < len; ++k) v[idx(g, k)] = av[idx(g, k)] - lse;
  }
  const std::size_t ia = a.id();
  return a.tape().record("log_softmax", a.shape(), std::move(v), {a},
                         [=](Tape& t, std::size_t self) {
    const auto dy = t.grad(self);
    const auto y = t.value(self);
    auto g = t.grad_buffer(ia);
    for (std::size_t gr = 0; gr < groups; ++gr) {
      double s = 0.0;
      for (std::size_t k = 0; k < len; ++k) s += dy[idx(gr, k)];
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t i = idx(gr, k);
        g[i] += dy[i] - std::exp(y[i]) * s;
      }
    }
  });
}

Tensor add_rowvec(Tensor a, Tensor row) {
  check_same_tape(a, row, "add_rowvec");
  const std::size_t r = a.rows(), c = a.cols();
  if (row.rows() != 1 || row.cols() != c) {
    throw ShapeError("add_rowvec: " + a.shape().str() + " + " + row.shape().str());
  }
  const auto av = a.value(), bv = row.value();
  std::vector<double> v(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) v[i * c + j] = av[i * c + j] + bv[j];
  }
  const std::size_t ia = a.id(), ib = row.id();
  return a.tape().record("add_rowvec", a.shape(), std::move(v), {a, row},
                         [=](Tape& t, std::size_t self) {
    const auto dy = t.grad(self);
    if (t.requires_grad(ia)) {
      auto g = t.grad_buffer(ia);
      for (std::size_t i = 0; i < dy.size(); ++i) g[i] += dy[i];
    }
    if (t.requires_grad(ib)) {
      auto g = t.grad_buffer(ib);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) g[j] += dy[i * c + j];
      }
    }
  });
}

Tensor mul_rowvec(Tensor a, Tensor row) {
  check_same_tape(a, row, "mul_rowvec");
  const std::size_t r = a.rows(), c = a.cols();
  if (row.rows() != 1 || row.cols() != c) {
    throw ShapeError("mul_rowvec: " + a.shape().str() + " * " + row.shape().str());
  }
  const auto av = a.value(), bv = row.value();
  std::vector<double> v(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) v[i * c + j] = av[i * c + j] * bv[j];
  }
  const std::size_t ia = a.id(), ib = row.id();
  return a.tape().record("mul_rowvec", a.shape(), std::move(v), {a, row},
                         [=](Tape& t, std::size_t self) {
    const auto dy = t.grad(self);
    const auto av = t.value(ia), bv = t.value(ib);
    if (t.requires_grad(ia)) {
      auto g = t.grad_buffer(ia);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += dy[i * c + j] * bv[j];
      }
    }
    if (t.requires_grad(ib)) {
      auto g = t.grad_buffer(ib);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) g[j] += dy[i * c + j] * av[i * c + j];
      }
    }
  });
}

Tensor frames(Tensor signal, std::size_t frame_len, std::size_t hop) {
  if (signal.rows() != 1) throw ShapeError("frames: signal must be a row vector");
  if (frame_len == 0 || hop == 0) throw ShapeError("frames: zero frame length or hop");
  const std::size_t n = signal.cols();
  if (n < frame_len) throw ShapeError("frames: signal shorter than one frame");
  const std::size_t count = (n - frame_len) / hop + 1;
  const auto sv = signal.value();
  std::vector<double> v(count * frame_len);
  for (std::size_t f = 0; f < count; ++f) {
    std::copy_n(&sv[f * hop], frame_len, &v[f * frame_len]);
  }
  const std::size_t is = signal.id();
  return signal.tape().record("frames", Shape{count, frame_len}, std::move(v), {signal},
                              [=](Tape& t, std::size_t self) {
    const auto dy = t.grad(self);
    auto g = t.grad_buffer(is);
    for (std::size_t f = 0; f < count; ++f) {
      for (std::size_t k = 0; k < frame_len; ++k) g[f * hop + k] += dy[f * frame_len + k];
    }
  });
}

Tensor pick(Tensor a, std::span<const std::size_t> index) {
  const std::size_t r = a.rows(), c = a.cols();
  if (index.size() != r) throw ShapeError("pick: need one index per row");
  std::vector<std::size_t> idx(index.begin(), index.end());
  const auto av = a.value();
  std::vector<double> v(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (idx[i] >= c) throw ShapeError("pick: column index out of range");
    v[i] = av[i * c + idx[i]];
  }
  const std::size_t ia = a.id();
  return a.tape().record("pick", Shape{r, 1}, std::move(v), {a},
                         [=](Tape& t, std::size_t self) {
                           const auto dy = t.grad(self);
                           auto g = t.grad_buffer(ia);
                           for (std::size_t i = 0; i < r; ++i) g[i * c + idx[i]] += dy[i];
                         });
}

// ---------------------------------------------------------------------------
// Adam

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state,
               const AdamConfig& config) {
  if (!(config.lr > 0.0)) throw ConfigError("adam: learning rate must be positive");
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 && config.beta2 < 1.0)) {
    throw ConfigError("adam: betas must lie in [0, 1)");
  }
  if (params.size() != grads.size()) throw ContractError("adam: params/grads count mismatch");
  if (state.step == 0 && state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam: state does not match params");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (state.m[k].size() != params[k].size() || grads[k].size() != params[k].size()) {
      throw ContractError("adam: state/grad shape does not match param " + std::to_string(k));
    }
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double g = grads[k][i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      params[k][i] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
    }
  }
}

}  // namespace advsr::grad
