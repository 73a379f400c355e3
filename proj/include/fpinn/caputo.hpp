#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpinn/numerics.hpp"

namespace fpinn {

/// Uniform time grid t_n = n*h for n = 0..N, anchored at t0 = 0.
/// Nodes are generated by multiplication, never by accumulation, so t(N) is
/// exactly N*h.
struct TimeGrid {
  double h = 0.0;
  int n_steps = 0;

  TimeGrid() = default;
  TimeGrid(double spacing, int steps) : h(spacing), n_steps(steps) {
    if (!(h > 0.0)) throw std::invalid_argument("TimeGrid: spacing must be positive");
    if (n_steps < 1) throw std::invalid_argument("TimeGrid: need at least one step");
  }

  /// Grid over [0, t_end] with `n_nodes` inclusive nodes (n_nodes - 1 steps).
  static TimeGrid over(double t_end, int n_nodes) {
    if (n_nodes < 2) throw std::invalid_argument("TimeGrid: need at least two nodes");
    return TimeGrid(t_end / static_cast<double>(n_nodes - 1), n_nodes - 1);
  }

  double t(int n) const { return static_cast<double>(n) * h; }
  double t_final() const { return t(n_steps); }
  int n_nodes() const { return n_steps + 1; }
};

enum class SchemeKind { Diethelm, L1 };

inline const char* to_string(SchemeKind k) {
  return k == SchemeKind::Diethelm ? "diethelm" : "l1";
}

namespace detail {
inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("fractional order must lie strictly inside (0,1)");
  }
}
}  // namespace detail

/// Three-branch coefficient a_{n,n_r} of the Diethelm finite-difference
/// discretization of the Caputo derivative.
inline double diethelm_coefficient(int n, int n_r, double alpha) {
  detail::check_alpha(alpha);
  if (n_r < 1 || n < 0 || n > n_r) {
    throw std::invalid_argument("diethelm_coefficient: require 0 <= n <= n_r, n_r >= 1");
  }
  const double e = 1.0 - alpha;
  if (n == 0) return 1.0;
  const double nd = static_cast<double>(n);
  if (n < n_r) {
    return std::pow(nd + 1.0, e) - 2.0 * std::pow(nd, e) + std::pow(nd - 1.0, e);
  }
  return (1.0 - alpha) * std::pow(nd, -alpha) - std::pow(nd, e) + std::pow(nd - 1.0, e);
}

/// Coefficient b_n of the L1 (piecewise-linear) discretization:
/// b_n = ((n+1)^{1-alpha} - n^{1-alpha}) / Gamma(2-alpha).
/// Strictly positive and strictly decreasing in n.
inline double l1_coefficient(int n, double alpha) {
  detail::check_alpha(alpha);
  if (n < 0) throw std::invalid_argument("l1_coefficient: n must be nonnegative");
  const double e = 1.0 - alpha;
  const double nd = static_cast<double>(n);
  return (std::pow(nd + 1.0, e) - std::pow(nd, e)) / gamma_fn(2.0 - alpha);
}

/// Discrete Caputo derivative operator on a uniform time grid.
///
/// The per-row coefficients and the scheme prefactor (1/(h^alpha Gamma(2-alpha))
/// for Diethelm, h^{-alpha} for L1) are folded into one triangular weight table:
///   D^alpha f(t_r) ~= sum_{j=0..r} w[r][j] * f(t_j),   r = 1..N.
/// Row weight w[r][0] is stored as the negative sum of the remaining entries,
/// which both formulas reduce to after telescoping, and application uses the
/// equivalent difference form sum_j w[r][j]*(f_j - f_0) so constant sequences
/// map to exactly zero.
class CaputoScheme {
 public:
  static CaputoScheme build(SchemeKind kind, double alpha, const TimeGrid& grid) {
    detail::check_alpha(alpha);
    CaputoScheme s;
    s.kind_ = kind;
    s.alpha_ = alpha;
    s.grid_ = grid;
    const int n = grid.n_steps;
    s.row_offset_.resize(static_cast<std::size_t>(n) + 1, 0);
    std::size_t total = 0;
    for (int r = 1; r <= n; ++r) {
      s.row_offset_[static_cast<std::size_t>(r)] = total;
      total += static_cast<std::size_t>(r) + 1;
    }
    s.weights_.resize(total);
    const double h_pow = std::pow(grid.h, -alpha);
    if (kind == SchemeKind::Diethelm) {
      const double pref = h_pow / gamma_fn(2.0 - alpha);
      for (int r = 1; r <= n; ++r) {
        double* w = s.weights_.data() + s.row_offset_[static_cast<std::size_t>(r)];
        for (int j = 1; j <= r; ++j) {
          w[j] = pref * diethelm_coefficient(r - j, r, alpha);
        }
        w[0] = negated_sum(w, r);
      }
    } else {
      for (int r = 1; r <= n; ++r) {
        double* w = s.weights_.data() + s.row_offset_[static_cast<std::size_t>(r)];
        w[r] = h_pow * l1_coefficient(0, alpha);
        for (int m = 1; m <= r - 1; ++m) {
          w[r - m] = h_pow * (l1_coefficient(m, alpha) - l1_coefficient(m - 1, alpha));
        }
        w[0] = negated_sum(w, r);
      }
    }
    return s;
  }

  SchemeKind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  const TimeGrid& grid() const { return grid_; }

  /// Weights w[r][0..r]; valid for r = 1..N.
  std::span<const double> row(int r) const {
    check_row(r);
    return {weights_.data() + row_offset_[static_cast<std::size_t>(r)],
            static_cast<std::size_t>(r) + 1};
  }

  /// Discrete Caputo derivative at node r from the function values at
  /// t_0..t_N. Exact linear functional of `values`; annihilates constants
  /// bitwise.
  double apply(std::span<const double> values, int r) const {
    check_row(r);
    if (values.size() != static_cast<std::size_t>(grid_.n_nodes())) {
      throw std::invalid_argument("CaputoScheme::apply: values must have N+1 entries");
    }
    const double* w = weights_.data() + row_offset_[static_cast<std::size_t>(r)];
    const double f0 = values[0];
    double acc = 0.0;
    for (int j = 1; j <= r; ++j) {
      acc += w[j] * (values[static_cast<std::size_t>(j)] - f0);
    }
    return acc;
  }

 private:
  static double negated_sum(const double* w, int r) {
    double s = 0.0;
    for (int j = 1; j <= r; ++j) s += w[j];
    return -s;
  }

  void check_row(int r) const {
    if (r < 1 || r > grid_.n_steps) {
      throw std::invalid_argument("CaputoScheme: row index must satisfy 1 <= r <= N");
    }
  }

  SchemeKind kind_ = SchemeKind::Diethelm;
  double alpha_ = 0.5;
  TimeGrid grid_;
  std::vector<double> weights_;
  std::vector<std::size_t> row_offset_;
};

/// Exact Caputo derivative of the monomial t^p (p >= 1, or p = 0 for a
/// constant): Gamma(p+1)/Gamma(p+1-alpha) * t^{p-alpha}.
inline double exact_caputo_monomial(double p, double alpha, double t) {
  detail::check_alpha(alpha);
  if (p == 0.0) return 0.0;
  if (p < 1.0) throw std::invalid_argument("exact_caputo_monomial: require p >= 1 or p == 0");
  if (t < 0.0) throw std::invalid_argument("exact_caputo_monomial: require t >= 0");
  if (t == 0.0) return 0.0;
  return gamma_fn(p + 1.0) / gamma_fn(p + 1.0 - alpha) * std::pow(t, p - alpha);
}

/// Least-squares slope of log(error) vs log(h) for the discrete derivative of
/// t^p at t_final, across a sequence of grid spacings (finest-to-coarsest or
/// any order; at least three entries, each intended to halve the previous).
inline double observed_order(SchemeKind kind, double alpha, double p, double t_final,
                             std::span<const double> h_sequence) {
  if (h_sequence.size() < 3) {
    throw std::invalid_argument("observed_order: need at least three grid resolutions");
  }
  if (!(t_final > 0.0)) throw std::invalid_argument("observed_order: t_final must be positive");
  const double exact = exact_caputo_monomial(p, alpha, t_final);
  std::vector<double> log_h;
  std::vector<double> log_err;
  log_h.reserve(h_sequence.size());
  log_err.reserve(h_sequence.size());
  for (double h : h_sequence) {
    const int n = static_cast<int>(std::llround(t_final / h));
    if (n < 1 || std::abs(n * h - t_final) > 1e-9 * t_final) {
      throw std::invalid_argument("observed_order: t_final must be an integer multiple of h");
    }
    const TimeGrid grid(h, n);
    const CaputoScheme scheme = CaputoScheme::build(kind, alpha, grid);
    std::vector<double> values(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) values[static_cast<std::size_t>(i)] = std::pow(grid.t(i), p);
    const double err = std::abs(scheme.apply(values, n) - exact);
    log_h.push_back(std::log(h));
    log_err.push_back(std::log(err));
  }
  // least-squares slope
  const double n = static_cast<double>(log_h.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < log_h.size(); ++i) {
    sx += log_h[i];
    sy += log_err[i];
    sxx += log_h[i] * log_h[i];
    sxy += log_h[i] * log_err[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline SchemeKind scheme_from_string(const std::string& s) {
  if (s == "diethelm") return SchemeKind::Diethelm;
  if (s == "l1") return SchemeKind::L1;
  throw std::invalid_argument("unknown scheme '" + s + "' (expected 'diethelm' or 'l1')");
}

}  // namespace fpinn
