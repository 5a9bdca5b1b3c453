#ifndef ADVSR_GRAD_H_
#define ADVSR_GRAD_H_

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices of doubles.
//
// A Tape owns every node created while evaluating an expression. Nodes are
// appended in construction order, which is therefore a valid topological
// order; backward() walks the tape in reverse. Tensors are lightweight
// handles (tape pointer + node index) and are only valid while their tape is
// alive. Tapes are not thread-safe: one tape per worker.
//
// Broadcasting is limited to scalar (1x1) operands of add/sub/mul plus the
// explicit row-vector ops add_rowvec/mul_rowvec.

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace advsr::grad {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

// Plain value storage, used for parameters and for data moving in and out of
// tapes.
struct Matrix {
  Shape shape;
  std::vector<double> data;

  Matrix() = default;
  Matrix(Shape s, std::vector<double> d);
  static Matrix zeros(std::size_t rows, std::size_t cols);

  std::size_t rows() const { return shape.rows; }
  std::size_t cols() const { return shape.cols; }
  double& at(std::size_t r, std::size_t c) { return data[r * shape.cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * shape.cols + c]; }
  bool operator==(const Matrix&) const = default;
};

class Tape;

class Tensor {
 public:
  Tensor() = default;

  const Shape& shape() const;
  std::size_t rows() const { return shape().rows; }
  std::size_t cols() const { return shape().cols; }
  std::span<const double> value() const;
  // Empty until backward() has run through this node.
  std::span<const double> grad() const;
  bool requires_grad() const;
  // Value of a 1x1 tensor.
  double item() const;
  Matrix matrix() const;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Accumulates d(loss)/d(parents) given d(loss)/d(self).
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor leaf(Matrix m, bool requires_grad = false);
  Tensor leaf(Shape shape, std::vector<double> data, bool requires_grad = false);
  // Borrows `data`, which must outlive the tape. Never requires grad.
  Tensor constant_view(Shape shape, std::span<const double> data);
  Tensor scalar(double v) { return leaf(Shape{1, 1}, {v}); }

  // Appends an op node. It requires grad iff any parent does. Throws
  // NumericError if `value` has a non-finite entry.
  Tensor record(const char* op, Shape shape, std::vector<double> value,
                std::initializer_list<Tensor> parents, BackwardFn backward);
  Tensor record(const char* op, Shape shape, std::vector<double> value,
                std::span<const Tensor> parents, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and propagates. Every requires-grad leaf ends
  // up with a gradient buffer (zeros if unreachable). Backward closures are
  // released afterwards, so a tape supports a single backward pass.
  void backward(Tensor loss);

  const Shape& shape(std::size_t id) const { return nodes_[id].shape; }
  std::span<const double> value(std::size_t id) const;
  std::span<const double> grad(std::size_t id) const { return nodes_[id].grad; }
  // Gradient buffer of a node, zero-initialised on first access.
  std::span<double> grad_buffer(std::size_t id);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<double> owned;
    const double* borrowed = nullptr;
    std::vector<double> grad;
    bool requires_grad = false;
    bool is_leaf = true;
    BackwardFn backward;
  };

  Tensor push(Node node);

  std::deque<Node> nodes_;
  bool consumed_ = false;
};

// Element-wise; shapes must match or one side must be 1x1.
Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);
Tensor mul(Tensor a, Tensor b);
Tensor scale(Tensor a, double c);
Tensor add_scalar(Tensor a, double c);

Tensor matmul(Tensor a, Tensor b);

Tensor tanh(Tensor a);
Tensor relu(Tensor a);
Tensor exp(Tensor a);
// Requires strictly positive input.
Tensor log(Tensor a);

// Reductions to 1x1.
Tensor sum(Tensor a);
Tensor mean(Tensor a);

// Half-open row/column ranges.
Tensor slice_rows(Tensor a, std::size_t begin, std::size_t end);
Tensor slice_cols(Tensor a, std::size_t begin, std::size_t end);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);

// axis 1 normalises each row, axis 0 each column.
Tensor log_softmax(Tensor a, int axis = 1);

// a (R x C) plus/times a 1 x C row vector applied to every row.
Tensor add_rowvec(Tensor a, Tensor row);
Tensor mul_rowvec(Tensor a, Tensor row);

// Splits a 1 x N signal into overlapping frames: T x frame_len with
// T = (N - frame_len) / hop + 1.
Tensor frames(Tensor signal, std::size_t frame_len, std::size_t hop);

// out[r] = a[r, index[r]], an R x 1 column.
Tensor pick(Tensor a, std::span<const std::size_t> index);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

// One bias-corrected Adam update, in place. The state is sized on first use;
// afterwards its shapes must match `params`.
void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state,
               const AdamConfig& config);

}  // namespace advsr::grad

#endif  // ADVSR_GRAD_H_
