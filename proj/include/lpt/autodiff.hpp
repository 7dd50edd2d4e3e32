#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lpt/tensor.hpp"

// Reverse-mode autodiff on a tape of Tensor-valued nodes. The primitive set is
// fixed and closed; model blocks are compositions of these ops. Nodes whose
// inputs all have requires_grad == false are skipped during backward, which is
// what makes Langevin passes (parameters frozen, only z0 live) cheap.

namespace lpt::ad {

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
  const Tensor& grad() const;
  bool requires_grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

class Tape {
 public:
  struct Node {
    Tensor val;
    Tensor grad;
    bool requires_grad = false;
    bool grad_live = false;  // set once something accumulated into grad
    std::function<void(Tape&)> backward;
  };

  Var leaf(Tensor v, bool requires_grad) {
    nodes_.push_back(Node{std::move(v), Tensor(), requires_grad, false, nullptr});
    return Var{this, int(nodes_.size()) - 1};
  }

  Var constant(Tensor v) { return leaf(std::move(v), false); }

  int emit(Tensor val, bool requires_grad, std::function<void(Tape&)> bw) {
    nodes_.push_back(Node{std::move(val), Tensor(), requires_grad,
                          false, requires_grad ? std::move(bw) : nullptr});
    return int(nodes_.size()) - 1;
  }

  Node& node(int id) { return nodes_[std::size_t(id)]; }
  const Node& node(int id) const { return nodes_[std::size_t(id)]; }
  const Tensor& val(int id) const { return nodes_[std::size_t(id)].val; }

  // Gradient buffer, zero-initialized on first touch.
  Tensor& grad_buf(int id) {
    Node& n = nodes_[std::size_t(id)];
    if (!n.grad_live) {
      n.grad = Tensor(n.val.rows(), n.val.cols());
      n.grad_live = true;
    }
    return n.grad;
  }

  // Runs reverse accumulation from a scalar root. Leaves with requires_grad
  // keep their gradients in grad_buf afterwards.
  void backward(Var root) {
    if (root.tape != this) throw std::logic_error("backward: var from another tape");
    if (val(root.id).size() != 1)
      throw std::logic_error("backward: root must be scalar");
    if (!node(root.id).requires_grad)
      throw std::logic_error("backward: root does not require grad");
    grad_buf(root.id)[0] = 1.0;
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[std::size_t(i)];
      if (n.requires_grad && n.grad_live && n.backward) n.backward(*this);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->val(id); }
inline const Tensor& Var::grad() const {
  const auto& n = tape->node(id);
  if (!n.grad_live) throw std::logic_error("Var::grad: no gradient accumulated");
  return n.grad;
}
inline bool Var::requires_grad() const { return tape->node(id).requires_grad; }

namespace detail {

inline void axpy(Tensor& g, const Tensor& d, double scale = 1.0) {
  auto G = g.map();
  auto D = d.map();
  if (scale == 1.0) G.noalias() += D; else G.noalias() += scale * D;
}

inline void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape) throw std::logic_error(std::string(op) + ": mixed tapes");
}

inline void require_same_shape(Var a, Var b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.value().shape_str() + " vs " + b.value().shape_str());
}

}  // namespace detail

// ---- arithmetic ----

inline Var add(Var a, Var b) {
  detail::require_same_tape(a, b, "add");
  detail::require_same_shape(a, b, "add");
  Tape& t = *a.tape;
  Tensor out = a.value();
  detail::axpy(out, b.value());
  bool rg = a.requires_grad() || b.requires_grad();
  int ida = a.id, idb = b.id;
  int id = t.emit(std::move(out), rg, nullptr);
  t.node(id).backward = [id, ida, idb](Tape& t) {
    const Tensor& g = t.node(id).grad;
    if (t.node(ida).requires_grad) detail::axpy(t.grad_buf(ida), g);
    if (t.node(idb).requires_grad) detail::axpy(t.grad_buf(idb), g);
  };
  return Var{&t, id};
}

inline Var sub(Var a, Var b) {
  detail::require_same_tape(a, b, "sub");
  detail::require_same_shape(a, b, "sub");
  Tape& t = *a.tape;
  Tensor out = a.value();
  detail::axpy(out, b.value(), -1.0);
  bool rg = a.requires_grad() || b.requires_grad();
  int ida = a.id, idb = b.id;
  int id = t.emit(std::move(out), rg, nullptr);
  t.node(id).backward = [id, ida, idb](Tape& t) {
    const Tensor& g = t.node(id).grad;
    if (t.node(ida).requires_grad) detail::axpy(t.grad_buf(ida), g);
    if (t.node(idb).requires_grad) detail::axpy(t.grad_buf(idb), g, -1.0);
  };
  return Var{&t, id};
}

inline Var mul(Var a, Var b) {
  detail::require_same_tape(a, b, "mul");
  detail::require_same_shape(a, b, "mul");
  Tape& t = *a.tape;
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  bool rg = a.requires_grad() || b.requires_grad();
  int ida = a.id, idb = b.id;
  int id = t.emit(std::move(out), rg, nullptr);
  t.node(id).backward = [id, ida, idb](Tape& t) {
    const Tensor& g = t.node(id).grad;
    if (t.node(ida).requires_grad) {
      Tensor& ga = t.grad_buf(ida);
      const Tensor& vb = t.val(idb);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (t.node(idb).requires_grad) {
      Tensor& gb = t.grad_buf(idb);
      const Tensor& va = t.val(ida);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * va[i];
    }
  };
  return Var{&t, id};
}

inline Var scale(Var a, double c) {
  Tape& t = *a.tape;
  Tensor out = a.value();
  for (auto& x : out.vec()) x *= c;
  int ida = a.id;
  int id = t.emit(std::move(out), a.requires_grad(), nullptr);
  t.node(id).backward = [id, ida, c](Tape& t) {
    detail::axpy(t.grad_buf(ida), t.node(id).grad, c);
  };
  return Var{&t, id};
}

inline Var add_scalar(Var a, double c) {
  Tape& t = *a.tape;
  Tensor out = a.value();
  for (auto& x : out.vec()) x += c;
  int ida = a.id;
  int id = t.emit(std::move(out), a.requires_grad(), nullptr);
  t.node(id).backward = [id, ida](Tape& t) {
    detail::axpy(t.grad_buf(ida), t.node(id).grad);
  };
  return Var{&t, id};
}

inline Var neg(Var a) { return scale(a, -1.0); }

inline Var matmul(Var a, Var b, bool ta = false, bool tb = false) {
  detail::require_same_tape(a, b, "matmul");
  Tape& t = *a.tape;
  Tensor out;
  matmul_into(a.value(), ta, b.value(), tb, out);
  bool rg = a.requires_grad() || b.requires_grad();
  int ida = a.id, idb = b.id;
  int id = t.emit(std::move(out), rg, nullptr);
  t.node(id).backward = [id, ida, idb, ta, tb](Tape& t) {
    const Tensor& g = t.node(id).grad;
    const Tensor& va = t.val(ida);
    const Tensor& vb = t.val(idb);
    if (t.node(ida).requires_grad) {
      Tensor& ga = t.grad_buf(ida);
      if (!ta && !tb) matmul_into(g, false, vb, true, ga, true);
      else if (ta && !tb) matmul_into(vb, false, g, true, ga, true);
      else if (!ta && tb) matmul_into(g, false, vb, false, ga, true);
      else matmul_into(vb, true, g, true, ga, true);
    }
    if (t.node(idb).requires_grad) {
      Tensor& gb = t.grad_buf(idb);
      if (!ta && !tb) matmul_into(va, true, g, false, gb, true);
      else if (ta && !tb) matmul_into(va, false, g, false, gb, true);
      else if (!ta && tb) matmul_into(g, true, va, false, gb, true);
      else matmul_into(g, true, va, true, gb, true);
    }
  };
  return Var{&t, id};
}

// X (n x m) plus a (1 x m) row vector broadcast over rows.
inline Var add_rowvec(Var x, Var b) {
  detail::require_same_tape(x, b, "add_rowvec");
  if (b.rows() != 1 || b.cols() != x.cols())
    throw std::invalid_argument("add_rowvec: bias must be (1 x cols)");
  Tape& t = *x.tape;
  Tensor out = x.value();
  const Tensor& bv = b.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out.at(r, c) += bv[c];
  bool rg = x.requires_grad() || b.requires_grad();
  int idx = x.id, idb = b.id;
  int id = t.emit(std::move(out), rg, nullptr);
  t.node(id).backward = [id, idx, idb](Tape& t) {
    const Tensor& g = t.node(id).grad;
    if (t.node(idx).requires_grad) detail::axpy(t.grad_buf(idx), g);
    if (t.node(idb).requires_grad) {
      Tensor& gb = t.grad_buf(idb);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g.at(r, c);
    }
  };
  return Var{&t, id};
}

// ---- elementwise nonlinearities ----

namespace detail {

template <typename Fwd, typename Bwd>
Var unary(Var a, const char* name, Fwd fwd, Bwd bwd_factor_from_xy) {
  Tape& t = *a.tape;
  Tensor out = a.value();
  for (auto& x : out.vec()) x = fwd(x);
  int ida = a.id;
  int id = t.emit(std::move(out), a.requires_grad(), nullptr);
  (void)name;
  t.node(id).backward = [id, ida, bwd_factor_from_xy](Tape& t) {
    const Tensor& g = t.node(id).grad;
    const Tensor& x = t.val(ida);
    const Tensor& y = t.val(id);
    Tensor& ga = t.grad_buf(ida);
    for (std::size_t i = 0; i < ga.size(); ++i)
      ga[i] += g[i] * bwd_factor_from_xy(x[i], y[i]);
  };
  return Var{&t, id};
}

}  // namespace detail

inline Var relu(Var a) {
  return detail::unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                       [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var tanh_(Var a) {
  return detail::unary(a, "tanh", [](double x) { return std::tanh(x); },
                       [](double, double y) { return 1.0 - y * y; });
}

inline Var exp_(Var a) {
  return detail::unary(a, "exp", [](double x) { return std::exp(x); },
                       [](double, double y) { return y; });
}

inline Var log_(Var a) {
  return detail::unary(a, "log", [](double x) { return std::log(x); },
                       [](double x, double) { return 1.0 / x; });
}

inline Var sqrt_(Var a) {
  return detail::unary(a, "sqrt", [](double x) { return std::sqrt(x); },
                       [](double, double y) { return 0.5 / y; });
}

inline Var square(Var a) {
  return detail::unary(a, "square", [](double x) { return x * x; },
                       [](double x, double) { return 2.0 * x; });
}

inline Var sin_(Var a) {
  return detail::unary(a, "sin", [](double x) { return std::sin(x); },
                       [](double x, double) { return std::cos(x); });
}

// ---- reductions ----

inline Var sum(Var a) {
  Tape& t = *a.tape;
  double s = 0.0;
  for (double x : a.value().vec()) s += x;
  int ida = a.id;
  int id = t.emit(Tensor(1, 1, s), a.requires_grad(), nullptr);
  t.node(id).backward = [id, ida](Tape& t) {
    const double g = t.node(id).grad[0];
    Tensor& ga = t.grad_buf(ida);
    for (auto& x : ga.vec()) x += g;
  };
  return Var{&t, id};
}

inline Var mean(Var a) {
  const double n = double(a.value().size());
  return scale(sum(a), 1.0 / n);
}

// ---- row-wise blocks ----

// y = (x - mean)/sqrt(var + eps) * gain + bias, per row.
inline Var layernorm_rows(Var x, Var gain, Var bias, double eps = 1e-5) {
  detail::require_same_tape(x, gain, "layernorm");
  detail::require_same_tape(x, bias, "layernorm");
  if (gain.rows() != 1 || gain.cols() != x.cols() || bias.rows() != 1 ||
      bias.cols() != x.cols())
    throw std::invalid_argument("layernorm: gain/bias must be (1 x cols)");
  Tape& t = *x.tape;
  const Tensor& xv = x.value();
  const std::size_t R = xv.rows(), C = xv.cols();
  Tensor out(R, C);
  auto xhat = std::make_shared<Tensor>(R, C);
  auto rstd = std::make_shared<Tensor>(R, 1);
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < R; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < C; ++c) mu += xv.at(r, c);
    mu /= double(C);
    double var = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      double d = xv.at(r, c) - mu;
      var += d * d;
    }
    var /= double(C);
    const double s = 1.0 / std::sqrt(var + eps);
    rstd->at(r, 0) = s;
    for (std::size_t c = 0; c < C; ++c) {
      double h = (xv.at(r, c) - mu) * s;
      xhat->at(r, c) = h;
      out.at(r, c) = h * gv[c] + bv[c];
    }
  }
  bool rg = x.requires_grad() || gain.requires_grad() || bias.requires_grad();
  int idx = x.id, idg = gain.id, idb = bias.id;
  int id = t.emit(std::move(out), rg, nullptr);
  t.node(id).backward = [id, idx, idg, idb, xhat, rstd](Tape& t) {
    const Tensor& g = t.node(id).grad;
    const std::size_t R = g.rows(), C = g.cols();
    const Tensor& gv = t.val(idg);
    if (t.node(idg).requires_grad) {
      Tensor& gg = t.grad_buf(idg);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) gg[c] += g.at(r, c) * xhat->at(r, c);
    }
    if (t.node(idb).requires_grad) {
      Tensor& gb = t.grad_buf(idb);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) gb[c] += g.at(r, c);
    }
    if (t.node(idx).requires_grad) {
      Tensor& gx = t.grad_buf(idx);
      for (std::size_t r = 0; r < R; ++r) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
          const double dh = g.at(r, c) * gv[c];
          m1 += dh;
          m2 += dh * xhat->at(r, c);
        }
        m1 /= double(C);
        m2 /= double(C);
        const double s = rstd->at(r, 0);
        for (std::size_t c = 0; c < C; ++c) {
          const double dh = g.at(r, c) * gv[c];
          gx.at(r, c) += s * (dh - m1 - xhat->at(r, c) * m2);
        }
      }
    }
  };
  return Var{&t, id};
}

namespace detail {

// Softmax over x[r, 0..lim(r)) with everything at/after lim zeroed.
template <typename LimFn>
Tensor masked_softmax_fwd(const Tensor& x, LimFn lim) {
  Tensor y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const std::size_t L = lim(r);
    double mx = -1e300;
    for (std::size_t c = 0; c < L; ++c) mx = std::max(mx, x.at(r, c));
    double Z = 0.0;
    for (std::size_t c = 0; c < L; ++c) Z += std::exp(x.at(r, c) - mx);
    for (std::size_t c = 0; c < L; ++c) y.at(r, c) = std::exp(x.at(r, c) - mx) / Z;
  }
  return y;
}

}  // namespace detail

inline Var softmax_rows(Var x) {
  Tape& t = *x.tape;
  const std::size_t C = x.cols();
  Tensor out = detail::masked_softmax_fwd(x.value(), [C](std::size_t) { return C; });
  int idx = x.id;
  int id = t.emit(std::move(out), x.requires_grad(), nullptr);
  t.node(id).backward = [id, idx](Tape& t) {
    const Tensor& g = t.node(id).grad;
    const Tensor& y = t.val(id);
    Tensor& gx = t.grad_buf(idx);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) dot += g.at(r, c) * y.at(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c)
        gx.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
    }
  };
  return Var{&t, id};
}

// Square score matrix; row i sees columns 0..i only (self-attention causality).
inline Var causal_softmax(Var x) {
  if (x.rows() != x.cols())
    throw std::invalid_argument("causal_softmax: requires square scores");
  Tape& t = *x.tape;
  Tensor out = detail::masked_softmax_fwd(x.value(), [](std::size_t r) { return r + 1; });
  int idx = x.id;
  int id = t.emit(std::move(out), x.requires_grad(), nullptr);
  t.node(id).backward = [id, idx](Tape& t) {
    const Tensor& g = t.node(id).grad;
    const Tensor& y = t.val(id);
    Tensor& gx = t.grad_buf(idx);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c <= r; ++c) dot += g.at(r, c) * y.at(r, c);
      for (std::size_t c = 0; c <= r; ++c)
        gx.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
    }
  };
  return Var{&t, id};
}

inline Var log_softmax_rows(Var x) {
  Tape& t = *x.tape;
  const Tensor& xv = x.value();
  Tensor out(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double mx = -1e300;
    for (std::size_t c = 0; c < xv.cols(); ++c) mx = std::max(mx, xv.at(r, c));
    double Z = 0.0;
    for (std::size_t c = 0; c < xv.cols(); ++c) Z += std::exp(xv.at(r, c) - mx);
    const double lZ = mx + std::log(Z);
    for (std::size_t c = 0; c < xv.cols(); ++c) out.at(r, c) = xv.at(r, c) - lZ;
  }
  int idx = x.id;
  int id = t.emit(std::move(out), x.requires_grad(), nullptr);
  t.node(id).backward = [id, idx](Tape& t) {
    const Tensor& g = t.node(id).grad;
    const Tensor& y = t.val(id);
    Tensor& gx = t.grad_buf(idx);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double gsum = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) gsum += g.at(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c)
        gx.at(r, c) += g.at(r, c) - std::exp(y.at(r, c)) * gsum;
    }
  };
  return Var{&t, id};
}

// ---- shape / indexing ----

inline Var reshape(Var a, std::size_t r, std::size_t c) {
  if (r * c != a.value().size())
    throw std::invalid_argument("reshape: element count mismatch");
  Tape& t = *a.tape;
  Tensor out(r, c, a.value().vec());
  int ida = a.id;
  int id = t.emit(std::move(out), a.requires_grad(), nullptr);
  t.node(id).backward = [id, ida](Tape& t) {
    const Tensor& g = t.node(id).grad;
    Tensor& ga = t.grad_buf(ida);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
  };
  return Var{&t, id};
}

inline Var gather_rows(Var a, std::vector<std::size_t> idx) {
  Tape& t = *a.tape;
  const Tensor& av = a.value();
  Tensor out(idx.size(), av.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= av.rows()) throw std::out_of_range("gather_rows: row index");
    for (std::size_t c = 0; c < av.cols(); ++c) out.at(r, c) = av.at(idx[r], c);
  }
  auto ix = std::make_shared<std::vector<std::size_t>>(std::move(idx));
  int ida = a.id;
  int id = t.emit(std::move(out), a.requires_grad(), nullptr);
  t.node(id).backward = [id, ida, ix](Tape& t) {
    const Tensor& g = t.node(id).grad;
    Tensor& ga = t.grad_buf(ida);
    for (std::size_t r = 0; r < ix->size(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) ga.at((*ix)[r], c) += g.at(r, c);
  };
  return Var{&t, id};
}

inline Var slice_rows(Var a, std::size_t r0, std::size_t r1) {
  if (r1 > a.rows() || r0 >= r1) throw std::out_of_range("slice_rows: bad range");
  Tape& t = *a.tape;
  const Tensor& av = a.value();
  Tensor out(r1 - r0, av.cols());
  for (std::size_t r = r0; r < r1; ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out.at(r - r0, c) = av.at(r, c);
  int ida = a.id;
  int id = t.emit(std::move(out), a.requires_grad(), nullptr);
  t.node(id).backward = [id, ida, r0](Tape& t) {
    const Tensor& g = t.node(id).grad;
    Tensor& ga = t.grad_buf(ida);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) ga.at(r0 + r, c) += g.at(r, c);
  };
  return Var{&t, id};
}

inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  Tape& t = *parts[0].tape;
  const std::size_t C = parts[0].cols();
  std::size_t R = 0;
  bool rg = false;
  for (auto p : parts) {
    if (p.tape != &t) throw std::logic_error("concat_rows: mixed tapes");
    if (p.cols() != C) throw std::invalid_argument("concat_rows: col mismatch");
    R += p.rows();
    rg = rg || p.requires_grad();
  }
  Tensor out(R, C);
  std::vector<int> ids;
  std::vector<std::size_t> offs;
  std::size_t off = 0;
  for (auto p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t r = 0; r < pv.rows(); ++r)
      for (std::size_t c = 0; c < C; ++c) out.at(off + r, c) = pv.at(r, c);
    ids.push_back(p.id);
    offs.push_back(off);
    off += pv.rows();
  }
  auto sids = std::make_shared<std::vector<int>>(std::move(ids));
  auto soffs = std::make_shared<std::vector<std::size_t>>(std::move(offs));
  int id = t.emit(std::move(out), rg, nullptr);
  t.node(id).backward = [id, sids, soffs](Tape& t) {
    const Tensor& g = t.node(id).grad;
    for (std::size_t k = 0; k < sids->size(); ++k) {
      const int pid = (*sids)[k];
      if (!t.node(pid).requires_grad) continue;
      Tensor& gp = t.grad_buf(pid);
      const std::size_t o = (*soffs)[k];
      for (std::size_t r = 0; r < gp.rows(); ++r)
        for (std::size_t c = 0; c < gp.cols(); ++c) gp.at(r, c) += g.at(o + r, c);
    }
  };
  return Var{&t, id};
}

inline Var tile_rows(Var a, std::size_t n) {
  if (a.rows() != 1) throw std::invalid_argument("tile_rows: input must be one row");
  Tape& t = *a.tape;
  const Tensor& av = a.value();
  Tensor out(n, av.cols());
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out.at(r, c) = av[c];
  int ida = a.id;
  int id = t.emit(std::move(out), a.requires_grad(), nullptr);
  t.node(id).backward = [id, ida](Tape& t) {
    const Tensor& g = t.node(id).grad;
    Tensor& ga = t.grad_buf(ida);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) ga[c] += g.at(r, c);
  };
  return Var{&t, id};
}

// out[r, 0] = x[r, idx[r]]; picks one column per row (taken-action log-probs).
inline Var take_per_row(Var x, std::vector<std::size_t> idx) {
  if (idx.size() != x.rows()) throw std::invalid_argument("take_per_row: index count");
  Tape& t = *x.tape;
  const Tensor& xv = x.value();
  Tensor out(idx.size(), 1);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= xv.cols()) throw std::out_of_range("take_per_row: column index");
    out.at(r, 0) = xv.at(r, idx[r]);
  }
  auto ix = std::make_shared<std::vector<std::size_t>>(std::move(idx));
  int idn = x.id;
  int id = t.emit(std::move(out), x.requires_grad(), nullptr);
  t.node(id).backward = [id, idn, ix](Tape& t) {
    const Tensor& g = t.node(id).grad;
    Tensor& gx = t.grad_buf(idn);
    for (std::size_t r = 0; r < ix->size(); ++r) gx.at(r, (*ix)[r]) += g.at(r, 0);
  };
  return Var{&t, id};
}

// ---- densities ----

// Sum of independent Gaussian log-densities with Var mean and observed data.
inline Var normal_loglik(Var mu, const Tensor& x, double variance) {
  if (variance <= 0.0) throw std::domain_error("normal_loglik: variance must be > 0");
  if (!mu.value().same_shape(x))
    throw std::invalid_argument("normal_loglik: shape mismatch");
  Tape& t = *mu.tape;
  const Tensor& mv = mu.value();
  const double c0 = -0.5 * std::log(2.0 * 3.141592653589793238462643383279 * variance);
  double s = 0.0;
  for (std::size_t i = 0; i < mv.size(); ++i) {
    const double d = x[i] - mv[i];
    s += c0 - d * d / (2.0 * variance);
  }
  auto xs = std::make_shared<Tensor>(x);
  int idm = mu.id;
  int id = t.emit(Tensor(1, 1, s), mu.requires_grad(), nullptr);
  t.node(id).backward = [id, idm, xs, variance](Tape& t) {
    const double g = t.node(id).grad[0];
    const Tensor& mv = t.val(idm);
    Tensor& gm = t.grad_buf(idm);
    for (std::size_t i = 0; i < gm.size(); ++i)
      gm[i] += g * ((*xs)[i] - mv[i]) / variance;
  };
  return Var{&t, id};
}

// Plain value-space counterpart used by oracles and audits.
inline double logpdf_normal(const Tensor& x, const Tensor& mean, double variance) {
  if (variance <= 0.0) throw std::domain_error("logpdf_normal: variance must be > 0");
  if (!x.same_shape(mean)) throw std::invalid_argument("logpdf_normal: shape mismatch");
  const double c0 = -0.5 * std::log(2.0 * 3.141592653589793238462643383279 * variance);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean[i];
    s += c0 - d * d / (2.0 * variance);
  }
  return s;
}

// ---- convolution (UNet building blocks) ----

// x: (C_in x L), w: (C_out x C_in*k), b: (1 x C_out). Zero padding.
inline Var conv1d(Var x, Var w, Var b, std::size_t k, std::size_t stride,
                  std::size_t pad) {
  detail::require_same_tape(x, w, "conv1d");
  detail::require_same_tape(x, b, "conv1d");
  Tape& t = *x.tape;
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  const std::size_t Cin = xv.rows(), L = xv.cols(), Cout = wv.rows();
  if (wv.cols() != Cin * k) throw std::invalid_argument("conv1d: weight shape");
  if (bv.rows() != 1 || bv.cols() != Cout)
    throw std::invalid_argument("conv1d: bias shape");
  if (L + 2 * pad < k) throw std::invalid_argument("conv1d: kernel exceeds input");
  const std::size_t Lout = (L + 2 * pad - k) / stride + 1;
  Tensor out(Cout, Lout);
  for (std::size_t oc = 0; oc < Cout; ++oc)
    for (std::size_t ol = 0; ol < Lout; ++ol) {
      double acc = bv[oc];
      for (std::size_t ic = 0; ic < Cin; ++ic)
        for (std::size_t kk = 0; kk < k; ++kk) {
          const std::ptrdiff_t p = std::ptrdiff_t(ol * stride + kk) - std::ptrdiff_t(pad);
          if (p < 0 || p >= std::ptrdiff_t(L)) continue;
          acc += wv.at(oc, ic * k + kk) * xv.at(ic, std::size_t(p));
        }
      out.at(oc, ol) = acc;
    }
  bool rg = x.requires_grad() || w.requires_grad() || b.requires_grad();
  int idx = x.id, idw = w.id, idb = b.id;
  int id = t.emit(std::move(out), rg, nullptr);
  t.node(id).backward = [id, idx, idw, idb, k, stride, pad](Tape& t) {
    const Tensor& g = t.node(id).grad;
    const Tensor& xv = t.val(idx);
    const Tensor& wv = t.val(idw);
    const std::size_t Cin = xv.rows(), L = xv.cols();
    const std::size_t Cout = g.rows(), Lout = g.cols();
    const bool need_x = t.node(idx).requires_grad;
    const bool need_w = t.node(idw).requires_grad;
    const bool need_b = t.node(idb).requires_grad;
    if (need_b) {
      Tensor& gb = t.grad_buf(idb);
      for (std::size_t oc = 0; oc < Cout; ++oc)
        for (std::size_t ol = 0; ol < Lout; ++ol) gb[oc] += g.at(oc, ol);
    }
    if (!need_x && !need_w) return;
    for (std::size_t oc = 0; oc < Cout; ++oc)
      for (std::size_t ol = 0; ol < Lout; ++ol) {
        const double go = g.at(oc, ol);
        if (go == 0.0) continue;
        for (std::size_t ic = 0; ic < Cin; ++ic)
          for (std::size_t kk = 0; kk < k; ++kk) {
            const std::ptrdiff_t p =
                std::ptrdiff_t(ol * stride + kk) - std::ptrdiff_t(pad);
            if (p < 0 || p >= std::ptrdiff_t(L)) continue;
            if (need_w)
              t.grad_buf(idw).at(oc, ic * k + kk) += go * xv.at(ic, std::size_t(p));
            if (need_x)
              t.grad_buf(idx).at(ic, std::size_t(p)) += go * wv.at(oc, ic * k + kk);
          }
      }
  };
  return Var{&t, id};
}

// Nearest-neighbor doubling along length: (C x L) -> (C x 2L).
inline Var upsample2(Var x) {
  Tape& t = *x.tape;
  const Tensor& xv = x.value();
  Tensor out(xv.rows(), xv.cols() * 2);
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t c = 0; c < xv.cols(); ++c) {
      out.at(r, 2 * c) = xv.at(r, c);
      out.at(r, 2 * c + 1) = xv.at(r, c);
    }
  int idx = x.id;
  int id = t.emit(std::move(out), x.requires_grad(), nullptr);
  t.node(id).backward = [id, idx](Tape& t) {
    const Tensor& g = t.node(id).grad;
    Tensor& gx = t.grad_buf(idx);
    for (std::size_t r = 0; r < gx.rows(); ++r)
      for (std::size_t c = 0; c < gx.cols(); ++c)
        gx.at(r, c) += g.at(r, 2 * c) + g.at(r, 2 * c + 1);
  };
  return Var{&t, id};
}

// ---- gradient checking ----

// f builds a scalar Var from leaf Vars created on the given tape, one per
// input tensor. Returns max over coordinates of
// |analytic - numeric| / max(1, |numeric|), per the checker contract.
template <typename F>
double finite_diff_check(F&& f, std::vector<Tensor> inputs, double epsilon = 1e-5) {
  if (epsilon < 1e-7 || epsilon > 1e-3)
    throw std::domain_error("finite_diff_check: epsilon outside [1e-7, 1e-3]");
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(inputs.size());
    for (const auto& in : inputs) leaves.push_back(tape.leaf(in, true));
    Var root = f(tape, leaves);
    tape.backward(root);
    for (auto v : leaves) {
      const auto& n = tape.node(v.id);
      analytic.push_back(n.grad_live ? n.grad
                                     : Tensor(v.rows(), v.cols()));
    }
  }
  auto eval = [&](const std::vector<Tensor>& ins) {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& in : ins) leaves.push_back(tape.leaf(in, true));
    return f(tape, leaves).value().item();
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double keep = inputs[i][j];
      inputs[i][j] = keep + epsilon;
      const double fp = eval(inputs);
      inputs[i][j] = keep - epsilon;
      const double fm = eval(inputs);
      inputs[i][j] = keep;
      const double numeric = (fp - fm) / (2.0 * epsilon);
      const double err = std::abs(analytic[i][j] - numeric) /
                         std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace lpt::ad
