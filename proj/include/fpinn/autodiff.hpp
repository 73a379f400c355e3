#pragma once

#include <cmath>
#include <cstdint>
#include <type_traits>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace fpinn::ad {

class Tape;
class Var;

/// Primitive operations recorded on the tape. The set is closed: everything
/// the solver differentiates is composed of these.
enum class Op : std::uint8_t {
  Leaf,     // independent input; value set externally
  Add,      // a + b
  Sub,      // a - b
  Mul,      // a * b
  Div,      // a / b
  Neg,      // -a
  AddC,     // a + aux
  RSubC,    // aux - a
  MulC,     // a * aux
  DivC,     // a / aux
  RDivC,    // aux / a
  PowC,     // a ^ aux
  Exp,      // exp(a)
  Tanh,     // tanh(a)
  MulAdd,   // a + b * c  (mul then add, two roundings)
  LinHist,  // fixed-weight history sum: sum_j w[j] * (f_j - f_0), j >= 1
};

/// Append-only record of a scalar computation. Recording evaluates eagerly;
/// `forward()` replays the same program after leaf values change, `backward()`
/// accumulates adjoints by the chain rule. Parents always precede children,
/// so a single reverse sweep suffices.
///
/// A tape is single-threaded during one forward/backward pass; independent
/// tapes may run concurrently.
class Tape {
 public:
  Var leaf(double value);

  std::size_t node_count() const { return op_.size(); }

  void set_leaf(const Var& v, double value);

  double value_at(std::int32_t index) const { return val_[static_cast<std::size_t>(index)]; }

  /// Recompute every non-leaf value in record order.
  void forward() {
    const std::size_t n = op_.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (op_[i] != Op::Leaf) val_[i] = eval_node(i);
    }
  }

  /// Reverse sweep from `output`, leaving d(output)/d(node) in the adjoint
  /// array for every node.
  void backward(const Var& output);

  double adjoint(const Var& v) const;

  void clear() {
    op_.clear();
    a_.clear();
    b_.clear();
    c_.clear();
    aux_.clear();
    val_.clear();
    adj_.clear();
    edge_node_.clear();
    edge_weight_.clear();
  }

  void reserve(std::size_t nodes) {
    op_.reserve(nodes);
    a_.reserve(nodes);
    b_.reserve(nodes);
    c_.reserve(nodes);
    aux_.reserve(nodes);
    val_.reserve(nodes);
  }

  // Recording primitives. Used by the Var operator overloads below.
  Var record_unary(Op op, const Var& a, double aux);
  Var record_binary(Op op, const Var& a, const Var& b);
  Var record_muladd(const Var& a, const Var& b, const Var& c);
  Var record_lin_hist(std::span<const double> weights, std::span<const Var> values);

 private:
  friend class Var;

  double eval_node(std::size_t i) const {
    const auto av = [&](std::int32_t k) { return val_[static_cast<std::size_t>(k)]; };
    switch (op_[i]) {
      case Op::Leaf: return val_[i];
      case Op::Add: return av(a_[i]) + av(b_[i]);
      case Op::Sub: return av(a_[i]) - av(b_[i]);
      case Op::Mul: return av(a_[i]) * av(b_[i]);
      case Op::Div: return av(a_[i]) / av(b_[i]);
      case Op::Neg: return -av(a_[i]);
      case Op::AddC: return av(a_[i]) + aux_[i];
      case Op::RSubC: return aux_[i] - av(a_[i]);
      case Op::MulC: return av(a_[i]) * aux_[i];
      case Op::DivC: return av(a_[i]) / aux_[i];
      case Op::RDivC: return aux_[i] / av(a_[i]);
      case Op::PowC: return std::pow(av(a_[i]), aux_[i]);
      case Op::Exp: return std::exp(av(a_[i]));
      case Op::Tanh: return std::tanh(av(a_[i]));
      case Op::MulAdd: return av(a_[i]) + av(b_[i]) * av(c_[i]);
      case Op::LinHist: {
        const std::int32_t ofs = a_[i];
        const std::int32_t cnt = b_[i];
        const double f0 = val_[static_cast<std::size_t>(edge_node_[ofs])];
        double acc = 0.0;
        for (std::int32_t k = 1; k < cnt; ++k) {
          acc += edge_weight_[ofs + k] *
                 (val_[static_cast<std::size_t>(edge_node_[ofs + k])] - f0);
        }
        return acc;
      }
    }
    return 0.0;  // unreachable
  }

  std::int32_t push(Op op, std::int32_t a, std::int32_t b, std::int32_t c, double aux,
                    double value) {
    op_.push_back(op);
    a_.push_back(a);
    b_.push_back(b);
    c_.push_back(c);
    aux_.push_back(aux);
    val_.push_back(value);
    return static_cast<std::int32_t>(op_.size()) - 1;
  }

  std::vector<Op> op_;
  std::vector<std::int32_t> a_, b_, c_;
  std::vector<double> aux_;
  std::vector<double> val_;
  std::vector<double> adj_;
  std::vector<std::int32_t> edge_node_;
  std::vector<double> edge_weight_;
};

/// A scalar that is either a plain constant (no tape) or a handle to a tape
/// node. Mixed constant/variable arithmetic folds constants away exactly.
class Var {
 public:
  Var() = default;
  Var(double c) : val_(c) {}  // NOLINT: implicit lift of constants is the point

  double value() const { return val_; }
  bool is_const() const { return tape_ == nullptr; }
  Tape* tape() const { return tape_; }
  std::int32_t index() const { return idx_; }

 private:
  friend class Tape;
  Var(Tape* t, std::int32_t idx, double v) : tape_(t), idx_(idx), val_(v) {}

  Tape* tape_ = nullptr;
  std::int32_t idx_ = -1;
  double val_ = 0.0;
};

inline Var Tape::leaf(double value) {
  const std::int32_t idx = push(Op::Leaf, -1, -1, -1, 0.0, value);
  return Var(this, idx, value);
}

inline void Tape::set_leaf(const Var& v, double value) {
  if (v.tape() != this || op_[static_cast<std::size_t>(v.index())] != Op::Leaf) {
    throw std::invalid_argument("Tape::set_leaf: not a leaf of this tape");
  }
  val_[static_cast<std::size_t>(v.index())] = value;
}

inline Var Tape::record_unary(Op op, const Var& a, double aux) {
  const std::int32_t idx = push(op, a.index(), -1, -1, aux, 0.0);
  val_[static_cast<std::size_t>(idx)] = eval_node(static_cast<std::size_t>(idx));
  return Var(this, idx, val_[static_cast<std::size_t>(idx)]);
}

inline Var Tape::record_binary(Op op, const Var& a, const Var& b) {
  if (a.tape() != this || b.tape() != this) {
    throw std::logic_error("Tape::record_binary: operands from different tapes");
  }
  const std::int32_t idx = push(op, a.index(), b.index(), -1, 0.0, 0.0);
  val_[static_cast<std::size_t>(idx)] = eval_node(static_cast<std::size_t>(idx));
  return Var(this, idx, val_[static_cast<std::size_t>(idx)]);
}

inline Var Tape::record_muladd(const Var& a, const Var& b, const Var& c) {
  const std::int32_t idx = push(Op::MulAdd, a.index(), b.index(), c.index(), 0.0, 0.0);
  val_[static_cast<std::size_t>(idx)] = eval_node(static_cast<std::size_t>(idx));
  return Var(this, idx, val_[static_cast<std::size_t>(idx)]);
}

inline Var Tape::record_lin_hist(std::span<const double> weights, std::span<const Var> values) {
  if (weights.size() != values.size() || values.size() < 2) {
    throw std::invalid_argument("record_lin_hist: need matching weights/values, length >= 2");
  }
  const std::int32_t ofs = static_cast<std::int32_t>(edge_node_.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k].is_const() || values[k].tape() != this) {
      throw std::invalid_argument("record_lin_hist: values must be nodes of this tape");
    }
    edge_node_.push_back(values[k].index());
    edge_weight_.push_back(weights[k]);
  }
  const std::int32_t idx =
      push(Op::LinHist, ofs, static_cast<std::int32_t>(values.size()), -1, 0.0, 0.0);
  val_[static_cast<std::size_t>(idx)] = eval_node(static_cast<std::size_t>(idx));
  return Var(this, idx, val_[static_cast<std::size_t>(idx)]);
}

inline void Tape::backward(const Var& output) {
  if (output.is_const() || output.tape() != this) {
    throw std::invalid_argument("Tape::backward: output is not a node of this tape");
  }
  adj_.assign(op_.size(), 0.0);
  adj_[static_cast<std::size_t>(output.index())] = 1.0;
  for (std::size_t ri = op_.size(); ri-- > 0;) {
    const double g = adj_[ri];
    if (g == 0.0) continue;
    const std::size_t ia = static_cast<std::size_t>(a_[ri]);
    const std::size_t ib = static_cast<std::size_t>(b_[ri]);
    switch (op_[ri]) {
      case Op::Leaf: break;
      case Op::Add:
        adj_[ia] += g;
        adj_[ib] += g;
        break;
      case Op::Sub:
        adj_[ia] += g;
        adj_[ib] -= g;
        break;
      case Op::Mul:
        adj_[ia] += g * val_[ib];
        adj_[ib] += g * val_[ia];
        break;
      case Op::Div:
        adj_[ia] += g / val_[ib];
        adj_[ib] -= g * val_[ri] / val_[ib];
        break;
      case Op::Neg: adj_[ia] -= g; break;
      case Op::AddC: adj_[ia] += g; break;
      case Op::RSubC: adj_[ia] -= g; break;
      case Op::MulC: adj_[ia] += g * aux_[ri]; break;
      case Op::DivC: adj_[ia] += g / aux_[ri]; break;
      case Op::RDivC: adj_[ia] -= g * val_[ri] / val_[ia]; break;
      case Op::PowC:
        adj_[ia] += g * aux_[ri] * std::pow(val_[ia], aux_[ri] - 1.0);
        break;
      case Op::Exp: adj_[ia] += g * val_[ri]; break;
      case Op::Tanh: adj_[ia] += g * (1.0 - val_[ri] * val_[ri]); break;
      case Op::MulAdd: {
        const std::size_t ic = static_cast<std::size_t>(c_[ri]);
        adj_[ia] += g;
        adj_[ib] += g * val_[ic];
        adj_[ic] += g * val_[ib];
        break;
      }
      case Op::LinHist: {
        const std::int32_t ofs = a_[ri];
        const std::int32_t cnt = b_[ri];
        for (std::int32_t k = 0; k < cnt; ++k) {
          adj_[static_cast<std::size_t>(edge_node_[ofs + k])] += g * edge_weight_[ofs + k];
        }
        break;
      }
    }
  }
}

inline double Tape::adjoint(const Var& v) const {
  if (v.is_const()) return 0.0;
  return adj_[static_cast<std::size_t>(v.index())];
}

namespace detail {
inline Tape* tape_of(const Var& a, const Var& b) { return a.is_const() ? b.tape() : a.tape(); }
}  // namespace detail

// ---- Var arithmetic -------------------------------------------------------
// Constants fold; exact algebraic identities (x+0, x*1, x*0, ...) skip node
// creation so jet seeds do not inflate the tape.

inline Var operator+(const Var& a, const Var& b) {
  if (a.is_const() && b.is_const()) return Var(a.value() + b.value());
  if (a.is_const()) {
    if (a.value() == 0.0) return b;
    return b.tape()->record_unary(Op::AddC, b, a.value());
  }
  if (b.is_const()) {
    if (b.value() == 0.0) return a;
    return a.tape()->record_unary(Op::AddC, a, b.value());
  }
  return a.tape()->record_binary(Op::Add, a, b);
}

inline Var operator-(const Var& a, const Var& b) {
  if (a.is_const() && b.is_const()) return Var(a.value() - b.value());
  if (b.is_const()) {
    if (b.value() == 0.0) return a;
    return a.tape()->record_unary(Op::AddC, a, -b.value());
  }
  if (a.is_const()) {
    if (a.value() == 0.0) return b.tape()->record_unary(Op::Neg, b, 0.0);
    return b.tape()->record_unary(Op::RSubC, b, a.value());
  }
  return a.tape()->record_binary(Op::Sub, a, b);
}

inline Var operator-(const Var& a) {
  if (a.is_const()) return Var(-a.value());
  return a.tape()->record_unary(Op::Neg, a, 0.0);
}

inline Var operator*(const Var& a, const Var& b) {
  if (a.is_const() && b.is_const()) return Var(a.value() * b.value());
  const Var& cv = a.is_const() ? a : b;
  const Var& vv = a.is_const() ? b : a;
  if (!a.is_const() && !b.is_const()) return a.tape()->record_binary(Op::Mul, a, b);
  if (cv.value() == 0.0) return Var(0.0);
  if (cv.value() == 1.0) return vv;
  if (cv.value() == -1.0) return vv.tape()->record_unary(Op::Neg, vv, 0.0);
  return vv.tape()->record_unary(Op::MulC, vv, cv.value());
}

inline Var operator/(const Var& a, const Var& b) {
  if (a.is_const() && b.is_const()) return Var(a.value() / b.value());
  if (b.is_const()) {
    if (b.value() == 1.0) return a;
    return a.tape()->record_unary(Op::DivC, a, b.value());
  }
  if (a.is_const()) {
    if (a.value() == 0.0) return Var(0.0);
    return b.tape()->record_unary(Op::RDivC, b, a.value());
  }
  return a.tape()->record_binary(Op::Div, a, b);
}

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator/=(Var& a, const Var& b) { return a = a / b; }

inline Var exp(const Var& a) {
  if (a.is_const()) return Var(std::exp(a.value()));
  return a.tape()->record_unary(Op::Exp, a, 0.0);
}

inline Var tanh(const Var& a) {
  if (a.is_const()) return Var(std::tanh(a.value()));
  return a.tape()->record_unary(Op::Tanh, a, 0.0);
}

inline Var pow(const Var& a, double c) {
  if (a.is_const()) return Var(std::pow(a.value(), c));
  if (c == 1.0) return a;
  return a.tape()->record_unary(Op::PowC, a, c);
}

/// a + b*c with the same two roundings as the plain-double expression.
inline double fmadd(double a, double b, double c) { return a + b * c; }

inline Var fmadd(const Var& a, const Var& b, const Var& c) {
  if (!a.is_const() && !b.is_const() && !c.is_const() && a.tape() == b.tape() &&
      b.tape() == c.tape()) {
    return a.tape()->record_muladd(a, b, c);
  }
  return a + b * c;
}

/// Fixed-weight linear functional over a history of tape values:
/// sum_{j>=1} w[j] * (f_j - f_0). The stored w[0] (the negated sum of the
/// rest) is the exact partial with respect to f_0 and drives the reverse rule.
inline Var weighted_history(std::span<const double> weights, std::span<const Var> values) {
  if (weights.size() != values.size() || values.empty()) {
    throw std::invalid_argument("weighted_history: weights/values size mismatch");
  }
  Tape* t = nullptr;
  for (const Var& v : values) {
    if (!v.is_const()) {
      t = v.tape();
      break;
    }
  }
  if (t == nullptr) {
    const double f0 = values[0].value();
    double acc = 0.0;
    for (std::size_t k = 1; k < values.size(); ++k) acc += weights[k] * (values[k].value() - f0);
    return Var(acc);
  }
  return t->record_lin_hist(weights, values);
}

/// Reverse-mode gradient of a scalar expression of the parameters. The
/// builder receives one tape variable per parameter and returns the scalar to
/// differentiate.
template <class Builder>
std::vector<double> grad(Builder&& loss_builder, std::span<const double> params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (double p : params) vars.push_back(tape.leaf(p));
  const Var loss = loss_builder(std::span<const Var>(vars));
  if (loss.is_const()) return std::vector<double>(params.size(), 0.0);
  tape.backward(loss);
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) g[i] = tape.adjoint(vars[i]);
  return g;
}

// ---- Second-order forward jets --------------------------------------------

/// Value plus first and second derivative with respect to one tagged input,
/// propagated by second-order Taylor rules. The component type T may itself
/// be a tape variable, which is how spatial derivatives stay differentiable
/// with respect to the parameters (forward-over-reverse).
template <class T>
struct Jet2 {
  T v{};
  T d1{};
  T d2{};

  Jet2() = default;
  Jet2(const T& value) : v(value) {}  // NOLINT: constants lift with zero derivatives
  Jet2(const T& value, const T& first, const T& second) : v(value), d1(first), d2(second) {}

  /// Jet seeded as the differentiation variable (d1 = 1, d2 = 0).
  static Jet2 seed(const T& value) { return Jet2(value, T(1.0), T(0.0)); }
};

template <class T>
Jet2<T> operator+(const Jet2<T>& a, const Jet2<T>& b) {
  return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2};
}
template <class T>
Jet2<T> operator-(const Jet2<T>& a, const Jet2<T>& b) {
  return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2};
}
template <class T>
Jet2<T> operator-(const Jet2<T>& a) {
  return {-a.v, -a.d1, -a.d2};
}
template <class T>
Jet2<T> operator*(const Jet2<T>& a, const Jet2<T>& b) {
  return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + T(2.0) * a.d1 * b.d1 + a.v * b.d2};
}
template <class T>
Jet2<T> operator/(const Jet2<T>& a, const Jet2<T>& b) {
  const T q = a.v / b.v;
  const T q1 = (a.d1 - q * b.d1) / b.v;
  const T q2 = (a.d2 - T(2.0) * q1 * b.d1 - q * b.d2) / b.v;
  return {q, q1, q2};
}

template <class T>
Jet2<T> operator+(const Jet2<T>& a, const std::type_identity_t<T>& c) {
  return {a.v + c, a.d1, a.d2};
}
template <class T>
Jet2<T> operator+(const std::type_identity_t<T>& c, const Jet2<T>& a) {
  return {c + a.v, a.d1, a.d2};
}
template <class T>
Jet2<T> operator-(const Jet2<T>& a, const std::type_identity_t<T>& c) {
  return {a.v - c, a.d1, a.d2};
}
template <class T>
Jet2<T> operator-(const std::type_identity_t<T>& c, const Jet2<T>& a) {
  return {c - a.v, -a.d1, -a.d2};
}
template <class T>
Jet2<T> operator*(const Jet2<T>& a, const std::type_identity_t<T>& c) {
  return {a.v * c, a.d1 * c, a.d2 * c};
}
template <class T>
Jet2<T> operator*(const std::type_identity_t<T>& c, const Jet2<T>& a) {
  return {c * a.v, c * a.d1, c * a.d2};
}
template <class T>
Jet2<T> operator/(const Jet2<T>& a, const std::type_identity_t<T>& c) {
  return {a.v / c, a.d1 / c, a.d2 / c};
}
template <class T>
Jet2<T> operator/(const std::type_identity_t<T>& c, const Jet2<T>& a) {
  return Jet2<T>(c) / a;
}

template <class T>
Jet2<T> exp(const Jet2<T>& a) {
  using std::exp;
  const T e = exp(a.v);
  return {e, e * a.d1, e * (a.d2 + a.d1 * a.d1)};
}

template <class T>
Jet2<T> tanh(const Jet2<T>& a) {
  using std::tanh;
  const T th = tanh(a.v);
  const T sech2 = T(1.0) - th * th;
  return {th, sech2 * a.d1, sech2 * a.d2 - T(2.0) * th * sech2 * a.d1 * a.d1};
}

template <class T>
Jet2<T> pow(const Jet2<T>& a, double c) {
  using std::pow;
  const T p0 = pow(a.v, c);
  const T p1 = T(c) * pow(a.v, c - 1.0);
  const T p2 = T(c * (c - 1.0)) * pow(a.v, c - 2.0);
  return {p0, p1 * a.d1, p2 * a.d1 * a.d1 + p1 * a.d2};
}

/// acc + w * x for a scalar weight and jet operand; the fused form is what the
/// network's affine loops emit.
template <class T>
Jet2<T> fmadd(const Jet2<T>& acc, const std::type_identity_t<T>& w, const Jet2<T>& x) {
  return {fmadd(acc.v, w, x.v), fmadd(acc.d1, w, x.d1), fmadd(acc.d2, w, x.d2)};
}

}  // namespace fpinn::ad
