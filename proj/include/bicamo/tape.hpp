#pragma once

// Minimal reverse-mode differentiation over Grid values.
//
// A Tape owns every node; Var is a cheap handle (tape pointer + node index).
// Nodes are appended in construction order, so reverse index order is a valid
// topological order and backward() visits each node exactly once. Scalars are
// 1x1 grids; binary ops broadcast a 1x1 operand against a full grid.
//
// A tape, and every Var on it, is confined to the thread that built it.

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bicamo/grid.hpp"

namespace bicamo {

class Tape;

class Var {
 public:
  Var() = default;
  const Grid& value() const;
  double scalar() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Gradients {
 public:
  const Grid& operator[](const Var& leaf) const {
    if (leaf.id() >= grads_.size() || grads_[leaf.id()].empty()) {
      throw std::invalid_argument("Gradients: variable is not a differentiable leaf");
    }
    return grads_[leaf.id()];
  }

 private:
  friend class Tape;
  std::vector<Grid> grads_;
};

class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // A differentiable input.
  Var leaf(Grid value) { return push(std::move(value), true, true, nullptr); }
  // A value treated as constant during differentiation.
  Var constant(Grid value) { return push(std::move(value), false, false, nullptr); }
  Var constant(double v) { return constant(Grid(1, 1, v)); }

  Var record(Grid value, std::vector<std::size_t> inputs, Backprop bp) {
    bool needs = false;
    for (auto in : inputs) needs = needs || nodes_[in].needs_grad;
    return push(std::move(value), false, needs, needs ? std::move(bp) : nullptr);
  }

  const Grid& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Adds `g` into the gradient slot of node `id`, summing over broadcast axes.
  void accumulate(std::size_t id, const Grid& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.empty()) n.grad = Grid(n.value.height(), n.value.width());
    if (n.grad.same_shape(g)) {
      for (std::size_t k = 0; k < g.size(); ++k) n.grad[k] += g[k];
    } else if (n.grad.size() == 1) {
      n.grad[0] += g.sum();
    } else {
      throw std::logic_error("Tape::accumulate: incompatible gradient shape");
    }
  }

  const Grid& grad(std::size_t id) const { return nodes_[id].grad; }

  Gradients backward(const Var& root) {
    if (root.tape() != this) throw std::invalid_argument("backward: root belongs to another tape");
    if (nodes_[root.id()].value.size() != 1) {
      throw std::invalid_argument("backward: root must be a scalar, got " +
                                  shape_string(nodes_[root.id()].value));
    }
    for (auto& n : nodes_) n.grad = Grid();
    if (nodes_[root.id()].needs_grad) nodes_[root.id()].grad = Grid(1, 1, 1.0);
    for (std::size_t id = root.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (n.grad.empty() || !n.backprop) continue;
      n.backprop(*this, id);
    }
    Gradients out;
    out.grads_.resize(nodes_.size());
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
      if (!nodes_[id].is_leaf) continue;
      out.grads_[id] = nodes_[id].grad.empty()
                           ? Grid(nodes_[id].value.height(), nodes_[id].value.width())
                           : nodes_[id].grad;
    }
    return out;
  }

 private:
  struct Node {
    Grid value;
    Grid grad;
    Backprop backprop;
    bool is_leaf = false;
    bool needs_grad = false;
  };

  Var push(Grid value, bool leaf, bool needs, Backprop bp) {
    if (!value.all_finite()) throw std::domain_error("Tape: non-finite value produced");
    nodes_.push_back(Node{std::move(value), Grid(), std::move(bp), leaf, needs});
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

inline const Grid& Var::value() const { return tape_->value(id_); }
inline double Var::scalar() const {
  const Grid& v = value();
  if (v.size() != 1) throw std::logic_error("Var::scalar: value is not 1x1");
  return v[0];
}

namespace ops {

namespace detail {

inline Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape() || a.tape() == nullptr) {
    throw std::invalid_argument("tape op: operands live on different tapes");
  }
  return *a.tape();
}

inline void check_broadcast(const Grid& a, const Grid& b, const char* what) {
  if (!a.same_shape(b) && a.size() != 1 && b.size() != 1) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_string(a) +
                                " vs " + shape_string(b));
  }
}

template <typename F>
Grid broadcast(const Grid& a, const Grid& b, F&& f) {
  const Grid& shape = a.size() >= b.size() ? a : b;
  Grid out(shape.height(), shape.width());
  const bool sa = a.size() == 1, sb = b.size() == 1;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = f(sa ? a[0] : a[k], sb ? b[0] : b[k]);
  return out;
}

template <typename F>
Var unary(const Var& x, Grid value, F&& local_grad) {
  Tape& t = *x.tape();
  const std::size_t in = x.id();
  return t.record(std::move(value), {in},
                  [in, lg = std::forward<F>(local_grad)](Tape& tp, std::size_t self) {
                    const Grid& g = tp.grad(self);
                    const Grid& xv = tp.value(in);
                    const Grid& yv = tp.value(self);
                    Grid gi(g.height(), g.width());
                    for (std::size_t k = 0; k < g.size(); ++k) gi[k] = g[k] * lg(xv[k], yv[k]);
                    tp.accumulate(in, gi);
                  });
}

}  // namespace detail

inline Var add(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  detail::check_broadcast(a.value(), b.value(), "add");
  Grid v = detail::broadcast(a.value(), b.value(), [](double x, double y) { return x + y; });
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(v), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    tp.accumulate(ia, tp.grad(self));
    tp.accumulate(ib, tp.grad(self));
  });
}

inline Var sub(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  detail::check_broadcast(a.value(), b.value(), "sub");
  Grid v = detail::broadcast(a.value(), b.value(), [](double x, double y) { return x - y; });
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(v), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    tp.accumulate(ia, tp.grad(self));
    tp.accumulate(ib, map(tp.grad(self), [](double g) { return -g; }));
  });
}

inline Var mul(const Var& a, const Var& b) {
  Tape& t = detail::same_tape(a, b);
  detail::check_broadcast(a.value(), b.value(), "mul");
  Grid v = detail::broadcast(a.value(), b.value(), [](double x, double y) { return x * y; });
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(v), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Grid& g = tp.grad(self);
    if (tp.needs_grad(ia)) {
      tp.accumulate(ia, detail::broadcast(g, tp.value(ib), [](double x, double y) { return x * y; }));
    }
    if (tp.needs_grad(ib)) {
      tp.accumulate(ib, detail::broadcast(g, tp.value(ia), [](double x, double y) { return x * y; }));
    }
  });
}

// Elementwise x^p for a fixed real exponent.
inline Var pow(const Var& x, double p) {
  Grid v = map(x.value(), [p](double a) { return std::pow(a, p); });
  return detail::unary(x, std::move(v), [p](double a, double) {
    return p == 0.0 ? 0.0 : p * std::pow(a, p - 1.0);
  });
}

inline Var sigmoid(const Var& x) {
  Grid v = map(x.value(), [](double a) { return bicamo::sigmoid(a); });
  return detail::unary(x, std::move(v), [](double, double y) { return y * (1.0 - y); });
}

inline Var log(const Var& x) {
  Grid v = map(x.value(), [](double a) {
    if (!(a > 0.0)) throw std::domain_error("log: argument must be positive");
    return std::log(a);
  });
  return detail::unary(x, std::move(v), [](double a, double) { return 1.0 / a; });
}

// Subgradient 0 at the origin.
inline Var abs(const Var& x) {
  Grid v = map(x.value(), [](double a) { return std::abs(a); });
  return detail::unary(x, std::move(v),
                       [](double a, double) { return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); });
}

inline Var sqrt(const Var& x) {
  Grid v = map(x.value(), [](double a) {
    if (a < 0.0) throw std::domain_error("sqrt: negative argument");
    return std::sqrt(a);
  });
  return detail::unary(x, std::move(v), [](double, double y) { return 0.5 / y; });
}

// Gradient passes where lo <= x <= hi, zero where the value was clipped.
inline Var clamp(const Var& x, double lo, double hi) {
  Grid v = map(x.value(), [=](double a) { return std::clamp(a, lo, hi); });
  return detail::unary(x, std::move(v),
                       [=](double a, double) { return (a >= lo && a <= hi) ? 1.0 : 0.0; });
}

inline Var sum(const Var& x) {
  Tape& t = *x.tape();
  const std::size_t in = x.id();
  return t.record(Grid(1, 1, x.value().sum()), {in}, [in](Tape& tp, std::size_t self) {
    const Grid& xv = tp.value(in);
    tp.accumulate(in, Grid(xv.height(), xv.width(), tp.grad(self)[0]));
  });
}

inline Var conv2d_same(const Var& x, const Kernel3x3& k) {
  Tape& t = *x.tape();
  const std::size_t in = x.id();
  return t.record(bicamo::conv2d_same(x.value(), k), {in}, [in, k](Tape& tp, std::size_t self) {
    tp.accumulate(in, conv2d_same_adjoint(tp.grad(self), k));
  });
}

inline Var avg_pool_same(const Var& x, int k) {
  Tape& t = *x.tape();
  const std::size_t in = x.id();
  return t.record(bicamo::avg_pool_same(x.value(), k), {in}, [in, k](Tape& tp, std::size_t self) {
    tp.accumulate(in, avg_pool_same_adjoint(tp.grad(self), k));
  });
}

inline Var resize_bilinear(const Var& x, int out_h, int out_w) {
  Tape& t = *x.tape();
  const std::size_t in = x.id();
  const int in_h = x.value().height(), in_w = x.value().width();
  return t.record(bicamo::resize_bilinear(x.value(), out_h, out_w), {in},
                  [in, in_h, in_w](Tape& tp, std::size_t self) {
                    tp.accumulate(in, resize_bilinear_adjoint(tp.grad(self), in_h, in_w));
                  });
}

// Conveniences composed from the primitives above.
inline Var scale(const Var& x, double c) { return mul(x, x.tape()->constant(c)); }
inline Var shift(const Var& x, double c) { return add(x, x.tape()->constant(c)); }
inline Var mean(const Var& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}
inline Var divide(const Var& a, const Var& b) { return mul(a, pow(b, -1.0)); }

}  // namespace ops

inline Var operator+(const Var& a, const Var& b) { return ops::add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return ops::sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return ops::mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return ops::divide(a, b); }
inline Var operator+(const Var& a, double c) { return ops::shift(a, c); }
inline Var operator-(const Var& a, double c) { return ops::shift(a, -c); }
inline Var operator*(const Var& a, double c) { return ops::scale(a, c); }
inline Var operator*(double c, const Var& a) { return ops::scale(a, c); }
inline Var operator-(double c, const Var& a) {
  return ops::sub(a.tape()->constant(c), a);
}

}  // namespace bicamo
