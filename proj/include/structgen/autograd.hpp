#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "structgen/tensor.hpp"

namespace structgen::ad {

class Tape;

// Handle to a value recorded on a tape. Cheap to copy; only valid while the
// tape that produced it is alive.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  double item() const { return value().item(); }
  double operator[](std::size_t i) const { return value()[i]; }
};

// Ordered record of operations. backward() replays the recorded rules in
// reverse order, each exactly once. A tape belongs to a single thread;
// parameter tensors it references may be shared read-only between tapes
// built in kNoGrad mode.
class Tape {
 public:
  enum class Mode { kGrad, kNoGrad };
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(Mode mode = Mode::kGrad) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // A value that never receives a gradient.
  Var constant(Tensor value);
  // A trainable leaf: gradients accumulate into `param.grad()`.
  Var param(Tensor& param);
  // A read-only view of a parameter (no gradient), for inference.
  Var frozen(const Tensor& param);

  // Records an op. `backward` runs only if some input requires a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient buffer of node `id`, allocated on first use. Empty when the
  // node does not require a gradient.
  std::span<double> grad(std::size_t id);
  std::span<const double> grad_view(std::size_t id) const;

  bool records_grad() const { return mode_ == Mode::kGrad; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and propagates. Throws ShapeError for a
  // non-scalar loss.
  void backward(Var loss);

  // Number of backward rules run by the last backward() call.
  std::size_t last_backward_visits() const { return last_visits_; }

 private:
  struct Node {
    Tensor own;
    Tensor* param = nullptr;
    const Tensor* frozen = nullptr;
    std::vector<double> grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var push(Node node);

  Mode mode_;
  std::deque<Node> nodes_;
  std::size_t last_visits_ = 0;
};

// ---- ops -----------------------------------------------------------------
// All shape mismatches throw ShapeError; the only broadcast is scale().

// [m x k]·[k x n], [m x k]·[k] and [k]·[k x n].
Var matmul(Var a, Var b);
// a·bᵀ for matrices: [m x k]·[n x k]ᵀ -> [m x n].
Var matmul_nt(Var a, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);

Var sigmoid(Var x);
Var tanh(Var x);

// Concatenates along `axis` (0 for vectors; 0 or 1 for matrices).
Var concat(std::span<const Var> parts, std::size_t axis = 0);
Var concat(std::initializer_list<Var> parts, std::size_t axis = 0);
// Contiguous piece [begin, begin+len) of a vector.
Var slice(Var x, std::size_t begin, std::size_t len);
// Row `r` of a matrix as a vector (embedding lookup).
Var row(Var m, std::size_t r);
// Stacks equally sized vectors into a matrix, one per row.
Var stack_rows(std::span<const Var> rows);

Var sum(Var x);
Var dot(Var a, Var b);
// Sum of scalar vars.
Var add_n(std::span<const Var> scalars);

Var softmax(Var x);
Var log_softmax(Var x);
// -log softmax(logits)[target], fused. Throws IndexError for a bad target.
Var cross_entropy(Var logits, std::size_t target);

// gamma_i = a_i·b_i / Σ_j a_j·b_j over two probability vectors. When b is
// exactly uniform the result is a copy of a. When the product sums to zero
// the result falls back to a (and so does the gradient).
Var normalized_product(Var a, Var b);

// Plain-vector helpers used outside the tape.
std::vector<double> softmax_values(std::span<const double> x);
std::vector<double> log_softmax_values(std::span<const double> x);
double sigmoid_value(double x);

}  // namespace structgen::ad
