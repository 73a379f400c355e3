#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpinn/autodiff.hpp"
#include "fpinn/caputo.hpp"
#include "fpinn/numerics.hpp"

namespace fpinn {

enum class ProblemName { FODE, FPDE2D, FPDE3D };

inline const char* to_string(ProblemName n) {
  switch (n) {
    case ProblemName::FODE: return "fode";
    case ProblemName::FPDE2D: return "fpde2d";
    case ProblemName::FPDE3D: return "fpde3d";
  }
  return "?";
}

inline ProblemName problem_from_string(const std::string& s) {
  if (s == "fode") return ProblemName::FODE;
  if (s == "fpde2d") return ProblemName::FPDE2D;
  if (s == "fpde3d") return ProblemName::FPDE3D;
  throw std::invalid_argument("unknown problem '" + s + "' (expected fode, fpde2d or fpde3d)");
}

/// Axis-aligned domain box: spatial intervals plus the time window [0, T].
struct Domain {
  std::vector<std::array<double, 2>> spatial_box;
  double t_end = 1.0;
};

/// One boundary face of the spatial box (2D: x=0/x=2; 3D adds y=0/y=2).
struct BoundaryFace {
  int axis = 0;
  int side = 0;  // 0 = lower end, 1 = upper end
};

// ---- source terms ----------------------------------------------------------

/// Right-hand side of the benchmark fODE: t^2 + (8/(3 sqrt(pi))) t^{3/2}.
inline double source_fode(double t) {
  if (t < 0.0) throw std::invalid_argument("source_fode: t must be nonnegative");
  constexpr double kCoef = 1.5045055561273502;  // 8/(3 sqrt(pi))
  return t * t + kCoef * t * std::sqrt(t);
}

/// Source of the 2D fractional diffusion benchmark.
inline double source_2d(double x, double t, double alpha) {
  const double parab = x * (2.0 - x);
  return 2.0 / gamma_fn(3.0 - alpha) * parab * std::pow(t, 2.0 - alpha) + t * t * parab +
         2.0 * t * t;
}

/// Source of the 3D benchmark, in the form consistent with its closed-form
/// solution u = t^2 [x(2-x) + y(2-y)]: the fractional-derivative term carries
/// the bracket only, so the manufactured identity holds exactly.
inline double source_3d(double x, double y, double t, double alpha) {
  const double bracket = x * (2.0 - x) + y * (2.0 - y);
  return 2.0 / gamma_fn(3.0 - alpha) * std::pow(t, 2.0 - alpha) * bracket + t * t * bracket +
         4.0 * t * t;
}

namespace detail {

/// Closed-form solutions, evaluated for any scalar supporting the jet
/// arithmetic (double or Jet2<double>), so exact derivatives come for free.
template <class T>
T analytical_eval(ProblemName name, std::span<const T> c) {
  switch (name) {
    case ProblemName::FODE: {
      const T& t = c[0];
      return t * t;
    }
    case ProblemName::FPDE2D: {
      const T& x = c[0];
      const T& t = c[1];
      return t * t * (x * (2.0 - x));
    }
    case ProblemName::FPDE3D: {
      const T& x = c[0];
      const T& y = c[1];
      const T& t = c[2];
      return t * t * (x * (2.0 - x) + y * (2.0 - y));
    }
  }
  return T(0.0);
}

}  // namespace detail

/// One of the three benchmark problems: domain, fractional order, source,
/// IC/BC data and the analytical solution used as ground truth. Coordinates
/// are ordered spatial-axes-first, time last.
struct Problem {
  ProblemName name = ProblemName::FODE;
  double alpha = 0.5;
  Domain domain;

  static Problem make(ProblemName name, double alpha = 0.5) {
    return make(name, alpha, default_time_window(name));
  }

  static Problem make(ProblemName name, double alpha, double time_window) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw std::invalid_argument("Problem: alpha must lie strictly inside (0,1)");
    }
    if (!(time_window > 0.0)) throw std::invalid_argument("Problem: time window must be positive");
    Problem p;
    p.name = name;
    p.alpha = alpha;
    p.domain.t_end = time_window;
    const int sd = (name == ProblemName::FODE) ? 0 : (name == ProblemName::FPDE2D ? 1 : 2);
    p.domain.spatial_box.assign(static_cast<std::size_t>(sd), {0.0, 2.0});
    return p;
  }

  static double default_time_window(ProblemName name) {
    return name == ProblemName::FPDE3D ? 0.5 : 1.0;
  }

  int spatial_dims() const { return static_cast<int>(domain.spatial_box.size()); }
  int input_dim() const { return spatial_dims() + 1; }

  double analytical(std::span<const double> coords) const {
    check_dim(coords);
    return detail::analytical_eval<double>(name, coords);
  }

  /// Analytical solution with first/second derivative along one axis.
  ad::Jet2<double> analytical_jet(std::span<const double> coords, int axis) const {
    check_dim(coords);
    std::vector<ad::Jet2<double>> in;
    in.reserve(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
      in.push_back(static_cast<int>(i) == axis ? ad::Jet2<double>::seed(coords[i])
                                               : ad::Jet2<double>(coords[i]));
    }
    return detail::analytical_eval<ad::Jet2<double>>(name, in);
  }

  double source(std::span<const double> coords) const {
    check_dim(coords);
    switch (name) {
      case ProblemName::FODE: return source_fode(coords[0]);
      case ProblemName::FPDE2D: return source_2d(coords[0], coords[1], alpha);
      case ProblemName::FPDE3D: return source_3d(coords[0], coords[1], coords[2], alpha);
    }
    return 0.0;
  }

  /// Initial data u(X, 0); zero for all three benchmarks.
  double initial(std::span<const double> /*spatial*/) const { return 0.0; }

  /// Dirichlet data on a face, as a function of the full coordinates.
  double boundary(const BoundaryFace& face, std::span<const double> coords) const {
    check_dim(coords);
    switch (name) {
      case ProblemName::FODE:
        throw std::invalid_argument("Problem::boundary: fODE has no boundary faces");
      case ProblemName::FPDE2D:
        return 0.0;
      case ProblemName::FPDE3D: {
        const double t = coords[2];
        if (face.axis == 0) {
          const double y = coords[1];
          return t * t * y * (2.0 - y);
        }
        const double x = coords[0];
        return t * t * x * (2.0 - x);
      }
    }
    return 0.0;
  }

  std::vector<BoundaryFace> faces() const {
    std::vector<BoundaryFace> f;
    for (int axis = 0; axis < spatial_dims(); ++axis) {
      f.push_back({axis, 0});
      f.push_back({axis, 1});
    }
    return f;
  }

 private:
  void check_dim(std::span<const double> coords) const {
    if (coords.size() != static_cast<std::size_t>(input_dim())) {
      throw std::invalid_argument("Problem: coordinate dimension mismatch");
    }
  }
};

// ---- residual assembly -----------------------------------------------------

/// A field plugs either the network or a closed-form solution into the
/// residual: it must provide a plain value and a per-axis second-order jet.
template <class F>
concept ResidualField = requires(const F& f, std::span<const double> coords, int axis) {
  { f.value(coords) } -> std::convertible_to<double>;
  { f.jet(coords, axis) } -> std::convertible_to<ad::Jet2<double>>;
};

/// Residual of the governing equation along one spatial column, evaluated at
/// every interior time node r = 1..N. The full value history at t_0..t_N
/// feeds the discrete Caputo operator; spatial second derivatives come from
/// the field's jets.
template <ResidualField F>
std::vector<double> discrete_residuals(const Problem& prob, const F& field,
                                       const CaputoScheme& scheme,
                                       std::span<const double> spatial) {
  const int sd = prob.spatial_dims();
  if (spatial.size() != static_cast<std::size_t>(sd)) {
    throw std::invalid_argument("discrete_residuals: spatial coordinate mismatch");
  }
  const TimeGrid& grid = scheme.grid();
  const int n = grid.n_steps;
  std::vector<double> coords(static_cast<std::size_t>(sd) + 1);
  for (int a = 0; a < sd; ++a) coords[static_cast<std::size_t>(a)] = spatial[static_cast<std::size_t>(a)];

  std::vector<double> values(static_cast<std::size_t>(n) + 1);
  for (int j = 0; j <= n; ++j) {
    coords.back() = grid.t(j);
    values[static_cast<std::size_t>(j)] = field.value(coords);
  }
  std::vector<double> res(static_cast<std::size_t>(n));
  for (int r = 1; r <= n; ++r) {
    coords.back() = grid.t(r);
    double laplacian = 0.0;
    for (int a = 0; a < sd; ++a) laplacian += field.jet(coords, a).d2;
    res[static_cast<std::size_t>(r) - 1] = scheme.apply(values, r) +
                                           values[static_cast<std::size_t>(r)] - laplacian -
                                           prob.source(coords);
  }
  return res;
}

/// Field adapter for the analytical solution (used by the manufactured
/// solution checks and the evaluation oracle mode).
struct AnalyticalField {
  const Problem* problem;
  double value(std::span<const double> coords) const { return problem->analytical(coords); }
  ad::Jet2<double> jet(std::span<const double> coords, int axis) const {
    return problem->analytical_jet(coords, axis);
  }
};

}  // namespace fpinn
