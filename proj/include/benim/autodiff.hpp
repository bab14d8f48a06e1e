#pragma once

// Minimal reverse-mode automatic differentiation over scalars, with support
// for fused multi-input/multi-output operations that supply their own adjoint.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace benim::ad {

class Tape;

/// Handle to a scalar recorded on a Tape.
class Var {
 public:
  Var() = default;
  double value() const;
  Tape* tape() const { return tape_; }
  std::size_t index() const { return index_; }

 private:
  friend class Tape;
  Var(Tape* t, std::size_t i) : tape_(t), index_(i) {}
  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

class Tape {
 public:
  using Backward =
      std::function<void(std::span<const double> out_adjoint,
                         std::span<double> in_adjoint)>;

  Var variable(double v) { return push(v, kNone, 0.0, kNone, 0.0); }

  /// Constants are recorded as leaves so they mix freely with variables.
  Var constant(double v) { return variable(v); }

  Var unary(Var a, double value, double partial) {
    check(a);
    return push(value, a.index_, partial, kNone, 0.0);
  }

  Var binary(Var a, Var b, double value, double pa, double pb) {
    check(a);
    check(b);
    return push(value, a.index_, pa, b.index_, pb);
  }

  /// Records an operation with many inputs and outputs. `backward` receives
  /// the adjoints of the outputs and must accumulate into the input adjoints.
  std::vector<Var> custom(std::span<const Var> inputs,
                          std::span<const double> output_values,
                          Backward backward) {
    if (!backward) throw std::invalid_argument("custom op without adjoint");
    CustomOp op;
    op.inputs.reserve(inputs.size());
    for (const Var& v : inputs) {
      check(v);
      op.inputs.push_back(v.index_);
    }
    std::vector<Var> out;
    out.reserve(output_values.size());
    op.first_output = values_.size();
    op.n_outputs = output_values.size();
    for (double v : output_values) out.push_back(variable(v));
    op.backward = std::move(backward);
    customs_.push_back(std::move(op));
    // Marker node placed after the outputs: every consumer of an output has a
    // larger index, so output adjoints are complete when the marker runs.
    Var marker = push(0.0, kNone, 0.0, kNone, 0.0);
    nodes_[marker.index_].custom = customs_.size() - 1;
    return out;
  }

  /// Runs the reverse sweep from `output` and returns all node adjoints.
  const std::vector<double>& backward(Var output) {
    check(output);
    adjoint_.assign(values_.size(), 0.0);
    adjoint_[output.index_] = 1.0;
    std::vector<double> in_adj;
    for (std::size_t i = output.index_ + 1; i-- > 0;) {
      const Node& nd = nodes_[i];
      if (nd.custom != kNone) {
        const CustomOp& op = customs_[nd.custom];
        in_adj.assign(op.inputs.size(), 0.0);
        op.backward(std::span<const double>(adjoint_.data() + op.first_output,
                                            op.n_outputs),
                    in_adj);
        for (std::size_t k = 0; k < op.inputs.size(); ++k)
          adjoint_[op.inputs[k]] += in_adj[k];
        continue;
      }
      const double a = adjoint_[i];
      if (a == 0.0) continue;
      if (nd.p0 != kNone) adjoint_[nd.p0] += a * nd.d0;
      if (nd.p1 != kNone) adjoint_[nd.p1] += a * nd.d1;
    }
    return adjoint_;
  }

  double adjoint(Var v) const { return adjoint_.at(v.index_); }
  double value(std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

  void clear() {
    nodes_.clear();
    values_.clear();
    customs_.clear();
    adjoint_.clear();
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  struct Node {
    std::size_t p0, p1;
    double d0, d1;
    std::size_t custom = kNone;
  };

  struct CustomOp {
    std::vector<std::size_t> inputs;
    std::size_t first_output = 0;
    std::size_t n_outputs = 0;
    Backward backward;
  };

  void check(const Var& v) const {
    if (v.tape_ != this)
      throw std::invalid_argument("variable belongs to a different tape");
  }

  Var push(double value, std::size_t p0, double d0, std::size_t p1, double d1) {
    nodes_.push_back(Node{p0, p1, d0, d1});
    values_.push_back(value);
    return Var(this, values_.size() - 1);
  }

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<CustomOp> customs_;
  std::vector<double> adjoint_;
};

inline double Var::value() const {
  if (!tape_) throw std::logic_error("unbound variable");
  return tape_->value(index_);
}

namespace detail {
inline Tape& tape_of(const Var& a) {
  if (!a.tape()) throw std::invalid_argument("unbound variable in expression");
  return *a.tape();
}
inline Tape& tape_of(const Var& a, const Var& b) {
  if (!a.tape() || a.tape() != b.tape())
    throw std::invalid_argument("operands recorded on different tapes");
  return *a.tape();
}
}  // namespace detail

inline Var operator+(Var a, Var b) {
  return detail::tape_of(a, b).binary(a, b, a.value() + b.value(), 1.0, 1.0);
}
inline Var operator-(Var a, Var b) {
  return detail::tape_of(a, b).binary(a, b, a.value() - b.value(), 1.0, -1.0);
}
inline Var operator*(Var a, Var b) {
  return detail::tape_of(a, b).binary(a, b, a.value() * b.value(), b.value(),
                                      a.value());
}
inline Var operator/(Var a, Var b) {
  const double bv = b.value();
  return detail::tape_of(a, b).binary(a, b, a.value() / bv, 1.0 / bv,
                                      -a.value() / (bv * bv));
}
inline Var operator-(Var a) {
  return detail::tape_of(a).unary(a, -a.value(), -1.0);
}
inline Var operator+(Var a, double c) {
  return detail::tape_of(a).unary(a, a.value() + c, 1.0);
}
inline Var operator+(double c, Var a) { return a + c; }
inline Var operator-(Var a, double c) {
  return detail::tape_of(a).unary(a, a.value() - c, 1.0);
}
inline Var operator-(double c, Var a) {
  return detail::tape_of(a).unary(a, c - a.value(), -1.0);
}
inline Var operator*(Var a, double c) {
  return detail::tape_of(a).unary(a, a.value() * c, c);
}
inline Var operator*(double c, Var a) { return a * c; }
inline Var operator/(Var a, double c) {
  return detail::tape_of(a).unary(a, a.value() / c, 1.0 / c);
}

inline Var& operator+=(Var& a, Var b) { return a = a + b; }

inline Var exp(Var a) {
  const double e = std::exp(a.value());
  return detail::tape_of(a).unary(a, e, e);
}
inline Var log(Var a) {
  return detail::tape_of(a).unary(a, std::log(a.value()), 1.0 / a.value());
}
inline Var tanh(Var a) {
  const double t = std::tanh(a.value());
  return detail::tape_of(a).unary(a, t, 1.0 - t * t);
}
inline Var square(Var a) {
  return detail::tape_of(a).unary(a, a.value() * a.value(), 2.0 * a.value());
}
inline Var relu(Var a) {
  const double v = a.value();
  return detail::tape_of(a).unary(a, v > 0.0 ? v : 0.0, v > 0.0 ? 1.0 : 0.0);
}
inline Var abs(Var a) {
  const double v = a.value();
  return detail::tape_of(a).unary(a, std::abs(v), v >= 0.0 ? 1.0 : -1.0);
}
inline Var softplus(Var a) {
  const double v = a.value();
  const double sp = v > 30.0 ? v : std::log1p(std::exp(v));
  const double sig = 1.0 / (1.0 + std::exp(-v));
  return detail::tape_of(a).unary(a, sp, sig);
}

/// Sum of many terms as one node per term (avoids a deep chain of temporaries).
inline Var sum(std::span<const Var> terms) {
  if (terms.empty()) throw std::invalid_argument("sum of no terms");
  Var acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = acc + terms[i];
  return acc;
}

}  // namespace benim::ad

namespace benim {

// Scalar counterparts so templated code works for double and ad::Var alike.
inline double square(double x) { return x * x; }
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> gradient;
};

/// Evaluates `loss(tape, params)` on a fresh tape and returns the value with
/// the exact reverse-mode gradient with respect to `params`.
template <typename Loss>
ValueAndGradient grad_loss(Loss&& loss, std::span<const double> params) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (double p : params) vars.push_back(tape.variable(p));
  ad::Var out = loss(tape, std::span<const ad::Var>(vars));
  const auto& adj = tape.backward(out);
  ValueAndGradient r;
  r.value = out.value();
  r.gradient.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    r.gradient[i] = adj[vars[i].index()];
  return r;
}

}  // namespace benim
