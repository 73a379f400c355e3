#pragma once

#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpinn/caputo.hpp"
#include "fpinn/problems.hpp"

namespace fpinn {

/// Requested collocation layout: inclusive per-axis node counts (spatial axes
/// first, time last), plus initial- and boundary-condition point counts.
///
/// The IC/BC counts follow the benchmark conventions: for the 2D problem they
/// are totals (BC split evenly across the two faces); for the 3D problem they
/// are generative counts, expanded to an n x n spatial grid for the IC and a
/// per-face s x s grid over (space x time) for the BC (so bc_points must be a
/// perfect square). For the fODE the IC locus is the single point t = 0,
/// enforced with ic_points replicas.
struct CollocationConfig {
  std::vector<int> points_per_axis;
  int ic_points = 0;
  int bc_points = 0;
};

/// Tensor-product collocation sets. Equation points live on the full
/// Cartesian grid with the t = 0 slice excluded (the discrete fractional
/// operator needs at least one step of history); they are ordered time-major:
/// index (r-1)*n_spatial + c maps to spatial column c at time node r.
struct CollocationSet {
  int input_dim = 1;
  int spatial_dims = 0;
  TimeGrid time_grid;

  std::vector<double> spatial_nodes;  // n_spatial * spatial_dims, column-lexicographic
  std::size_t n_spatial = 1;

  std::vector<double> ic_points;  // n_ic * spatial_dims (t = 0 implicit; empty for fODE)
  std::size_t n_ic = 0;

  std::vector<double> bc_points;  // n_bc * input_dim (full coordinates)
  std::vector<int> bc_face;       // index into Problem::faces()
  std::size_t n_bc = 0;

  std::size_t n_eq() const { return n_spatial * static_cast<std::size_t>(time_grid.n_steps); }

  std::span<const double> spatial_column(std::size_t c) const {
    return {spatial_nodes.data() + c * static_cast<std::size_t>(spatial_dims),
            static_cast<std::size_t>(spatial_dims)};
  }

  int eq_time_index(std::size_t i) const {
    return 1 + static_cast<int>(i / n_spatial);
  }

  /// Full coordinates of equation point i (time-major order).
  void eq_point(std::size_t i, std::span<double> out) const {
    const std::size_t c = i % n_spatial;
    const int r = eq_time_index(i);
    const auto col = spatial_column(c);
    for (int a = 0; a < spatial_dims; ++a) out[static_cast<std::size_t>(a)] = col[static_cast<std::size_t>(a)];
    out[static_cast<std::size_t>(spatial_dims)] = time_grid.t(r);
  }
};

namespace detail {

inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    v[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return v;
}

}  // namespace detail

inline CollocationSet build_grid(const Problem& prob, const CollocationConfig& cfg) {
  const int sd = prob.spatial_dims();
  if (cfg.points_per_axis.size() != static_cast<std::size_t>(sd) + 1) {
    throw std::invalid_argument("build_grid: need one point count per axis (spatial..., time)");
  }
  for (int c : cfg.points_per_axis) {
    if (c < 2) throw std::invalid_argument("build_grid: every axis needs at least two points");
  }
  if (cfg.ic_points < 0 || cfg.bc_points < 0) {
    throw std::invalid_argument("build_grid: negative point counts");
  }

  CollocationSet set;
  set.spatial_dims = sd;
  set.input_dim = sd + 1;
  set.time_grid = TimeGrid::over(prob.domain.t_end, cfg.points_per_axis.back());

  // spatial tensor grid (axis-0 major)
  std::vector<std::vector<double>> axes;
  for (int a = 0; a < sd; ++a) {
    axes.push_back(detail::linspace(prob.domain.spatial_box[static_cast<std::size_t>(a)][0],
                                    prob.domain.spatial_box[static_cast<std::size_t>(a)][1],
                                    cfg.points_per_axis[static_cast<std::size_t>(a)]));
  }
  set.n_spatial = 1;
  for (const auto& ax : axes) set.n_spatial *= ax.size();
  set.spatial_nodes.reserve(set.n_spatial * static_cast<std::size_t>(sd));
  if (sd == 1) {
    for (double x : axes[0]) set.spatial_nodes.push_back(x);
  } else if (sd == 2) {
    for (double x : axes[0]) {
      for (double y : axes[1]) {
        set.spatial_nodes.push_back(x);
        set.spatial_nodes.push_back(y);
      }
    }
  }

  // initial-condition points
  if (sd == 0) {
    set.n_ic = static_cast<std::size_t>(cfg.ic_points);
  } else if (sd == 1) {
    if (cfg.ic_points > 0) {
      if (cfg.ic_points < 2) throw std::invalid_argument("build_grid: 2D ic_points must be 0 or >= 2");
      const auto xs = detail::linspace(prob.domain.spatial_box[0][0],
                                       prob.domain.spatial_box[0][1], cfg.ic_points);
      set.ic_points = xs;
      set.n_ic = xs.size();
    }
  } else {
    if (cfg.ic_points > 0) {
      if (cfg.ic_points < 2) throw std::invalid_argument("build_grid: 3D ic_points must be >= 2 per axis");
      const auto xs = detail::linspace(prob.domain.spatial_box[0][0],
                                       prob.domain.spatial_box[0][1], cfg.ic_points);
      const auto ys = detail::linspace(prob.domain.spatial_box[1][0],
                                       prob.domain.spatial_box[1][1], cfg.ic_points);
      for (double x : xs) {
        for (double y : ys) {
          set.ic_points.push_back(x);
          set.ic_points.push_back(y);
        }
      }
      set.n_ic = xs.size() * ys.size();
    }
  }

  // boundary-condition points
  const auto faces = (sd > 0) ? prob.faces() : std::vector<BoundaryFace>{};
  if (cfg.bc_points > 0 && sd == 0) {
    throw std::invalid_argument("build_grid: fODE has no boundary faces");
  }
  if (cfg.bc_points > 0 && sd == 1) {
    // Total split as evenly as possible, remainder to faces in listing order.
    const int n_faces = static_cast<int>(faces.size());
    for (int fi = 0; fi < n_faces; ++fi) {
      int k = cfg.bc_points / n_faces + (fi < cfg.bc_points % n_faces ? 1 : 0);
      if (k < 2) throw std::invalid_argument("build_grid: too few 2D bc points per face");
      const auto ts = detail::linspace(0.0, prob.domain.t_end, k);
      const BoundaryFace& f = faces[static_cast<std::size_t>(fi)];
      const double x = prob.domain.spatial_box[0][static_cast<std::size_t>(f.side)];
      for (double t : ts) {
        set.bc_points.push_back(x);
        set.bc_points.push_back(t);
        set.bc_face.push_back(fi);
      }
    }
    set.n_bc = set.bc_face.size();
  }
  if (cfg.bc_points > 0 && sd == 2) {
    // Per-face generative count: s x s grid over (other spatial axis x time).
    const int s = static_cast<int>(std::llround(std::sqrt(static_cast<double>(cfg.bc_points))));
    if (s * s != cfg.bc_points || s < 2) {
      throw std::invalid_argument("build_grid: 3D bc_points must be a perfect square >= 4");
    }
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
      const BoundaryFace& f = faces[fi];
      const int other = 1 - f.axis;
      const auto us = detail::linspace(prob.domain.spatial_box[static_cast<std::size_t>(other)][0],
                                       prob.domain.spatial_box[static_cast<std::size_t>(other)][1], s);
      const auto ts = detail::linspace(0.0, prob.domain.t_end, s);
      const double fixed = prob.domain.spatial_box[static_cast<std::size_t>(f.axis)][static_cast<std::size_t>(f.side)];
      for (double u : us) {
        for (double t : ts) {
          double xy[2];
          xy[f.axis] = fixed;
          xy[other] = u;
          set.bc_points.push_back(xy[0]);
          set.bc_points.push_back(xy[1]);
          set.bc_points.push_back(t);
          set.bc_face.push_back(static_cast<int>(fi));
        }
      }
    }
    set.n_bc = set.bc_face.size();
  }
  return set;
}

/// Dump all point sets as CSV (role, face, coordinates) for plotting.
inline void write_collocation_csv(const CollocationSet& set, std::ostream& out) {
  const char* coord_names[3][3] = {{"t", "", ""}, {"x", "t", ""}, {"x", "y", "t"}};
  out << "role,face";
  for (int a = 0; a < set.input_dim; ++a) {
    out << ',' << coord_names[set.input_dim - 1][a];
  }
  out << '\n';
  std::vector<double> coords(static_cast<std::size_t>(set.input_dim));
  for (std::size_t i = 0; i < set.n_eq(); ++i) {
    set.eq_point(i, coords);
    out << "eq,-1";
    for (double c : coords) out << ',' << c;
    out << '\n';
  }
  for (std::size_t i = 0; i < set.n_ic; ++i) {
    out << "ic,-1";
    for (int a = 0; a < set.spatial_dims; ++a) {
      out << ',' << set.ic_points[i * static_cast<std::size_t>(set.spatial_dims) + static_cast<std::size_t>(a)];
    }
    out << ",0\n";
  }
  for (std::size_t i = 0; i < set.n_bc; ++i) {
    out << "bc," << set.bc_face[i];
    for (int a = 0; a < set.input_dim; ++a) {
      out << ',' << set.bc_points[i * static_cast<std::size_t>(set.input_dim) + static_cast<std::size_t>(a)];
    }
    out << '\n';
  }
}

}  // namespace fpinn
