#include "structgen/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "structgen/errors.hpp"
#include "structgen/kernels.hpp"

namespace structgen::ad {

const Tensor& Var::value() const { return tape->value(id); }

// ---- Tape ------------------------------------------------------------------

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.own = std::move(value);
  return push(std::move(n));
}

Var Tape::param(Tensor& param) {
  Node n;
  n.param = &param;
  n.requires_grad = records_grad();
  return push(std::move(n));
}

Var Tape::frozen(const Tensor& param) {
  Node n;
  n.frozen = &param;
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.own = std::move(value);
  if (records_grad()) {
    n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                  [this](const Var& v) { return nodes_[v.id].requires_grad; });
    if (n.requires_grad) n.backward = std::move(backward);
  }
  return push(std::move(n));
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.param) return *n.param;
  if (n.frozen) return *n.frozen;
  return n.own;
}

std::span<double> Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return {};
  if (n.param) return n.param->ensure_grad();
  if (n.grad.size() != n.own.size()) n.grad.assign(n.own.size(), 0.0);
  return n.grad;
}

std::span<const double> Tape::grad_view(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.param) return n.param->grad();
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("backward: loss was recorded on another tape");
  if (loss.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + shape_to_string(loss.shape()));
  }
  last_visits_ = 0;
  auto seed = grad(loss.id);
  if (seed.empty()) return;
  seed[0] += 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
    ++last_visits_;
  }
}

// ---- helpers ---------------------------------------------------------------

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_to_string(a) + " and " +
                   shape_to_string(b));
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) shape_mismatch(op, a.shape(), b.shape());
}

void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("operands recorded on different tapes");
}

template <typename F>
Var unary(Var x, F&& forward, Tape::BackwardFn backward) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = forward(xv[i]);
  return x.tape->record(std::move(out), {x}, std::move(backward));
}

}  // namespace

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> softmax_values(std::span<const double> x) {
  if (x.empty()) throw ShapeError("softmax: empty input");
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

std::vector<double> log_softmax_values(std::span<const double> x) {
  if (x.empty()) throw ShapeError("log_softmax: empty input");
  const double mx = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (double v : x) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - lse;
  return out;
}

// ---- matrix products -------------------------------------------------------

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  std::size_t m = 0, k = 0, n = 0;
  Shape out_shape;
  if (av.rank() == 2 && bv.rank() == 2) {
    m = av.shape()[0], k = av.shape()[1], n = bv.shape()[1];
    if (bv.shape()[0] != k) shape_mismatch("matmul", av.shape(), bv.shape());
    out_shape = {m, n};
  } else if (av.rank() == 2 && bv.rank() == 1) {
    m = av.shape()[0], k = av.shape()[1], n = 1;
    if (bv.shape()[0] != k) shape_mismatch("matmul", av.shape(), bv.shape());
    out_shape = {m};
  } else if (av.rank() == 1 && bv.rank() == 2) {
    m = 1, k = av.shape()[0], n = bv.shape()[1];
    if (bv.shape()[0] != k) shape_mismatch("matmul", av.shape(), bv.shape());
    out_shape = {n};
  } else {
    shape_mismatch("matmul", av.shape(), bv.shape());
  }

  Tensor out(out_shape);
  kernels::gemm({false, false, m, n, k, false}, av.values(), bv.values(), out.values());
  return a.tape->record(std::move(out), {a, b}, [a, b, m, n, k](Tape& t, std::size_t self) {
    auto dc = t.grad_view(self);
    if (auto da = t.grad(a.id); !da.empty()) {
      // dA[m x k] += dC[m x n] · Bᵀ
      kernels::gemm({false, true, m, k, n, true}, dc, t.value(b.id).values(), da);
    }
    if (auto db = t.grad(b.id); !db.empty()) {
      // dB[k x n] += Aᵀ · dC
      kernels::gemm({true, false, k, n, m, true}, t.value(a.id).values(), dc, db);
    }
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.shape()[1] != bv.shape()[1]) {
    shape_mismatch("matmul_nt", av.shape(), bv.shape());
  }
  const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[0];
  Tensor out(Shape{m, n});
  kernels::gemm({false, true, m, n, k, false}, av.values(), bv.values(), out.values());
  return a.tape->record(std::move(out), {a, b}, [a, b, m, n, k](Tape& t, std::size_t self) {
    auto dc = t.grad_view(self);
    if (auto da = t.grad(a.id); !da.empty()) {
      // dA[m x k] += dC[m x n] · B[n x k]
      kernels::gemm({false, false, m, k, n, true}, dc, t.value(b.id).values(), da);
    }
    if (auto db = t.grad(b.id); !db.empty()) {
      // dB[n x k] += dCᵀ · A
      kernels::gemm({true, false, n, k, m, true}, dc, t.value(a.id).values(), db);
    }
  });
}

// ---- elementwise -------------------------------------------------------------

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("add", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    auto g = t.grad_view(self);
    for (Var in : {a, b}) {
      if (auto d = t.grad(in.id); !d.empty()) {
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
    }
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("sub", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    auto g = t.grad_view(self);
    if (auto d = t.grad(a.id); !d.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (auto d = t.grad(b.id); !d.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("mul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    auto g = t.grad_view(self);
    if (auto d = t.grad(a.id); !d.empty()) {
      const Tensor& bv = t.value(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * bv[i];
    }
    if (auto d = t.grad(b.id); !d.empty()) {
      const Tensor& av = t.value(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double v) { return v * s; }, [a, s](Tape& t, std::size_t self) {
    auto g = t.grad_view(self);
    auto d = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * s;
  });
}

Var sigmoid(Var x) {
  return unary(x, sigmoid_value, [x](Tape& t, std::size_t self) {
    auto g = t.grad_view(self);
    const Tensor& y = t.value(self);
    auto d = t.grad(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Var x) {
  return unary(x, [](double v) { return std::tanh(v); }, [x](Tape& t, std::size_t self) {
    auto g = t.grad_view(self);
    const Tensor& y = t.value(self);
    auto d = t.grad(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

// ---- structural ----------------------------------------------------------------

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  std::vector<Var> ins(parts.begin(), parts.end());
  const Shape& first = ins[0].shape();
  const std::size_t rank = first.size();
  if (rank == 0 || rank > 2 || axis >= rank) {
    throw ShapeError("concat: unsupported axis " + std::to_string(axis) + " for shape " +
                     shape_to_string(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Var& v : ins) {
    require_same_tape(ins[0], v);
    const Shape& s = v.shape();
    if (s.size() != rank) shape_mismatch("concat", first, s);
    for (std::size_t d = 0; d < rank; ++d) {
      if (d != axis && s[d] != first[d]) shape_mismatch("concat", first, s);
    }
    out_shape[axis] += s[axis];
  }

  // Treat every input as [outer x inner_i] and interleave along inner.
  const std::size_t outer = (rank == 2 && axis == 1) ? first[0] : 1;
  const std::size_t out_inner = shape_size(out_shape) / outer;
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (const Var& v : ins) {
    const Tensor& vv = v.value();
    const std::size_t inner = vv.size() / outer;
    for (std::size_t r = 0; r < outer; ++r) {
      std::copy_n(vv.values().data() + r * inner, inner,
                  out.values().data() + r * out_inner + offset);
    }
    offset += inner;
  }
  Tape* tape = ins[0].tape;
  return tape->record(std::move(out), std::span<const Var>(ins),
                      [ins, outer, out_inner](Tape& t, std::size_t self) {
                        auto g = t.grad_view(self);
                        std::size_t off = 0;
                        for (const Var& v : ins) {
                          const std::size_t inner = t.value(v.id).size() / outer;
                          if (auto d = t.grad(v.id); !d.empty()) {
                            for (std::size_t r = 0; r < outer; ++r) {
                              for (std::size_t i = 0; i < inner; ++i) {
                                d[r * inner + i] += g[r * out_inner + off + i];
                              }
                            }
                          }
                          off += inner;
                        }
                      });
}

Var slice(Var x, std::size_t begin, std::size_t len) {
  const Tensor& xv = x.value();
  if (xv.rank() != 1 || begin + len > xv.size()) {
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(begin + len) +
                     ") out of range for shape " + shape_to_string(xv.shape()));
  }
  std::vector<double> vals(xv.values().begin() + static_cast<std::ptrdiff_t>(begin),
                           xv.values().begin() + static_cast<std::ptrdiff_t>(begin + len));
  return x.tape->record(Tensor::vector(std::move(vals)), {x},
                        [x, begin](Tape& t, std::size_t self) {
                          auto g = t.grad_view(self);
                          auto d = t.grad(x.id);
                          for (std::size_t i = 0; i < g.size(); ++i) d[begin + i] += g[i];
                        });
}

Var row(Var m, std::size_t r) {
  const Tensor& mv = m.value();
  if (mv.rank() != 2) throw ShapeError("row: expected a matrix, got " + shape_to_string(mv.shape()));
  if (r >= mv.shape()[0]) {
    throw IndexError("row " + std::to_string(r) + " out of range for shape " +
                     shape_to_string(mv.shape()));
  }
  const std::size_t cols = mv.shape()[1];
  const auto first = mv.values().begin() + static_cast<std::ptrdiff_t>(r * cols);
  std::vector<double> vals(first, first + static_cast<std::ptrdiff_t>(cols));
  return m.tape->record(Tensor::vector(std::move(vals)), {m}, [m, r, cols](Tape& t, std::size_t self) {
    auto g = t.grad_view(self);
    auto d = t.grad(m.id);
    for (std::size_t i = 0; i < cols; ++i) d[r * cols + i] += g[i];
  });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  std::vector<Var> ins(rows.begin(), rows.end());
  const Shape& first = ins[0].shape();
  if (first.size() != 1) throw ShapeError("stack_rows: rows must be vectors, got " + shape_to_string(first));
  const std::size_t cols = first[0];
  Tensor out(Shape{ins.size(), cols});
  for (std::size_t r = 0; r < ins.size(); ++r) {
    require_same_tape(ins[0], ins[r]);
    if (ins[r].shape() != first) shape_mismatch("stack_rows", first, ins[r].shape());
    std::copy_n(ins[r].value().values().data(), cols, out.values().data() + r * cols);
  }
  Tape* tape = ins[0].tape;
  return tape->record(std::move(out), std::span<const Var>(ins), [ins, cols](Tape& t, std::size_t self) {
    auto g = t.grad_view(self);
    for (std::size_t r = 0; r < ins.size(); ++r) {
      if (auto d = t.grad(ins[r].id); !d.empty()) {
        for (std::size_t i = 0; i < cols; ++i) d[i] += g[r * cols + i];
      }
    }
  });
}

// ---- reductions ------------------------------------------------------------

Var sum(Var x) {
  const Tensor& xv = x.value();
  double s = 0.0;
  for (double v : xv.values()) s += v;
  return x.tape->record(Tensor::scalar(s), {x}, [x](Tape& t, std::size_t self) {
    const double g = t.grad_view(self)[0];
    for (double& d : t.grad(x.id)) d += g;
  });
}

Var dot(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("dot", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  return a.tape->record(Tensor::scalar(s), {a, b}, [a, b](Tape& t, std::size_t self) {
    const double g = t.grad_view(self)[0];
    if (auto d = t.grad(a.id); !d.empty()) {
      const Tensor& bv = t.value(b.id);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g * bv[i];
    }
    if (auto d = t.grad(b.id); !d.empty()) {
      const Tensor& av = t.value(a.id);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g * av[i];
    }
  });
}

Var add_n(std::span<const Var> scalars) {
  if (scalars.empty()) throw ShapeError("add_n: no inputs");
  std::vector<Var> ins(scalars.begin(), scalars.end());
  double s = 0.0;
  for (const Var& v : ins) {
    if (v.size() != 1) throw ShapeError("add_n: non-scalar input " + shape_to_string(v.shape()));
    s += v.item();
  }
  Tape* tape = ins[0].tape;
  return tape->record(Tensor::scalar(s), std::span<const Var>(ins), [ins](Tape& t, std::size_t self) {
    const double g = t.grad_view(self)[0];
    for (const Var& v : ins) {
      if (auto d = t.grad(v.id); !d.empty()) d[0] += g;
    }
  });
}

// ---- probability ---------------------------------------------------------------

Var softmax(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 1) throw ShapeError("softmax: expected a vector, got " + shape_to_string(xv.shape()));
  Tensor out = Tensor::vector(softmax_values(xv.values()));
  return x.tape->record(std::move(out), {x}, [x](Tape& t, std::size_t self) {
    auto g = t.grad_view(self);
    const Tensor& y = t.value(self);
    double inner = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * y[i];
    auto d = t.grad(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += y[i] * (g[i] - inner);
  });
}

Var log_softmax(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 1) throw ShapeError("log_softmax: expected a vector, got " + shape_to_string(xv.shape()));
  Tensor out = Tensor::vector(log_softmax_values(xv.values()));
  return x.tape->record(std::move(out), {x}, [x](Tape& t, std::size_t self) {
    auto g = t.grad_view(self);
    const Tensor& y = t.value(self);
    double total = 0.0;
    for (double v : g) total += v;
    auto d = t.grad(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] - std::exp(y[i]) * total;
  });
}

Var cross_entropy(Var logits, std::size_t target) {
  const Tensor& xv = logits.value();
  if (xv.rank() != 1 || xv.size() == 0) {
    throw ShapeError("cross_entropy: expected a nonempty vector, got " + shape_to_string(xv.shape()));
  }
  if (target >= xv.size()) {
    throw IndexError("cross_entropy: target " + std::to_string(target) + " outside vocabulary of " +
                     std::to_string(xv.size()));
  }
  const double mx = *std::max_element(xv.values().begin(), xv.values().end());
  double z = 0.0;
  for (double v : xv.values()) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  return logits.tape->record(Tensor::scalar(lse - xv[target]), {logits},
                             [logits, target, lse](Tape& t, std::size_t self) {
                               const double g = t.grad_view(self)[0];
                               const Tensor& x = t.value(logits.id);
                               auto d = t.grad(logits.id);
                               for (std::size_t i = 0; i < d.size(); ++i) {
                                 d[i] += g * std::exp(x[i] - lse);
                               }
                               d[target] -= g;
                             });
}

Var normalized_product(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("normalized_product", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 1 || av.size() == 0) {
    throw ShapeError("normalized_product: expected nonempty vectors, got " + shape_to_string(av.shape()));
  }
  const std::size_t n = av.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += av[i] * bv[i];
  const bool fallback = !(total > 0.0) || !std::isfinite(total);
  const bool uniform = std::all_of(bv.values().begin(), bv.values().end(),
                                   [&](double v) { return v == bv[0]; });

  Tensor out(av.shape());
  if (fallback || uniform) {
    std::copy(av.values().begin(), av.values().end(), out.values().begin());
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bv[i] / total;
  }
  return a.tape->record(std::move(out), {a, b}, [a, b, total, fallback](Tape& t, std::size_t self) {
    auto g = t.grad_view(self);
    const std::size_t n = g.size();
    if (fallback) {
      if (auto d = t.grad(a.id); !d.empty()) {
        for (std::size_t i = 0; i < n; ++i) d[i] += g[i];
      }
      return;
    }
    const Tensor& y = t.value(self);
    const Tensor& av = t.value(a.id);
    const Tensor& bv = t.value(b.id);
    double inner = 0.0;
    for (std::size_t i = 0; i < n; ++i) inner += g[i] * y[i];
    // d gamma_i / d p_j = (delta_ij - gamma_i) / total, with p = a ⊙ b.
    auto da = t.grad(a.id);
    auto db = t.grad(b.id);
    for (std::size_t i = 0; i < n; ++i) {
      const double dp = (g[i] - inner) / total;
      if (!da.empty()) da[i] += dp * bv[i];
      if (!db.empty()) db[i] += dp * av[i];
    }
  });
}

}  // namespace structgen::ad
