#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpinn/autodiff.hpp"
#include "fpinn/caputo.hpp"
#include "fpinn/collocation.hpp"
#include "fpinn/network.hpp"
#include "fpinn/numerics.hpp"
#include "fpinn/problems.hpp"

namespace fpinn {

/// Step-scheduled first-order training budgeted by iterations and/or wall
/// time. lr_values[k] applies from iteration lr_change_iters[k-1]+1 onward
/// (1-based update indices), so |lr_values| = |lr_change_iters| + 1.
struct TrainConfig {
  std::vector<double> lr_values{0.01};
  std::vector<long> lr_change_iters{};
  long max_iters = 0;             // 0 = unlimited
  double max_wall_seconds = 0.0;  // 0 = unlimited
  std::uint64_t seed = 0;         // recorded for reproducibility bookkeeping
  SchemeKind scheme_kind = SchemeKind::Diethelm;
  double loss_tolerance = 0.0;    // 0 = none; stop once phi_total <= tolerance

  void validate() const {
    if (lr_values.empty()) throw std::invalid_argument("TrainConfig: need at least one learning rate");
    for (double lr : lr_values) {
      if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: learning rates must be positive");
    }
    if (lr_change_iters.size() + 1 != lr_values.size()) {
      throw std::invalid_argument("TrainConfig: need |lr_values| = |lr_change_iters| + 1");
    }
    for (std::size_t i = 0; i + 1 < lr_change_iters.size(); ++i) {
      if (lr_change_iters[i] >= lr_change_iters[i + 1]) {
        throw std::invalid_argument("TrainConfig: lr_change_iters must be strictly increasing");
      }
    }
    if (max_iters <= 0 && max_wall_seconds <= 0.0) {
      throw std::invalid_argument("TrainConfig: need a finite iteration or wall-time budget");
    }
    if (loss_tolerance < 0.0) throw std::invalid_argument("TrainConfig: negative loss tolerance");
  }

  /// Learning rate applied at 1-based update index `iter`.
  double lr_at(long iter) const {
    std::size_t k = 0;
    while (k < lr_change_iters.size() && iter > lr_change_iters[k]) ++k;
    return lr_values[k];
  }
};

struct LossBreakdown {
  double eq = 0.0;
  double ic = 0.0;
  double bc = 0.0;
  double total = 0.0;
};

struct TraceEntry {
  long iter = 0;  // number of optimizer updates applied before this sample
  double phi_eq = 0.0;
  double phi_ic = 0.0;
  double phi_bc = 0.0;
  double phi_total = 0.0;
  double lr = 0.0;  // rate of the next update
  double elapsed_s = 0.0;
};

struct TrainReport {
  long iterations = 0;
  double wall_seconds = 0.0;
  std::vector<TraceEntry> loss_trace;
  ErrorMetrics final_metrics;
  bool diverged = false;
  std::string diagnostic;
};

/// Optional side outputs of train(): streamed trace CSV, periodic
/// checkpoints, and an override for the held-out evaluation grid.
struct TrainIO {
  std::ostream* trace_csv = nullptr;
  std::string checkpoint_dir;
  long checkpoint_every = 0;
  std::vector<int> eval_grid;  // empty = per-problem default
};

namespace detail {

/// Adam with fixed decay rates 0.9/0.999 and stabilizer 1e-8.
class Adam {
 public:
  explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      const double mhat = m_[i] / bc1;
      const double vhat = v_[i] / bc2;
      params[i] -= lr * mhat / (std::sqrt(vhat) + kEps);
    }
  }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

 private:
  std::vector<double> m_, v_;
  long t_ = 0;
};

/// The full-batch fPINN loss as two replayable tape programs: one per
/// spatial column of equation points (parameters, column coordinates and
/// source samples enter as leaves) and one per IC/BC point. Recording happens
/// once; every iteration only resets leaves, replays forward and runs the
/// reverse sweep, accumulating raw gradient sums that are scaled by the MSE
/// normalizers at the end.
class LossGraph {
 public:
  LossGraph(const Problem& prob, const NetworkConfig& net_cfg, const CollocationSet& colloc,
            const CaputoScheme& scheme)
      : prob_(prob), net_cfg_(net_cfg), colloc_(colloc), scheme_(scheme) {
    if (net_cfg.input_dim != prob.input_dim()) {
      throw std::invalid_argument("LossGraph: network input dimension does not match problem");
    }
    if (colloc.input_dim != prob.input_dim()) {
      throw std::invalid_argument("LossGraph: collocation set does not match problem");
    }
    n_params_ = net_cfg.param_count();
    build_column_tape();
    build_point_tape();
    precompute_leaf_data();
    grad_eq_.assign(n_params_, 0.0);
    grad_pt_.assign(n_params_, 0.0);
  }

  std::size_t param_count() const { return n_params_; }

  /// Loss at `params`; when `grad` is non-empty (size n_params) it receives
  /// d(phi_total)/d(theta).
  LossBreakdown evaluate(std::span<const double> params, std::span<double> grad) {
    const bool want_grad = !grad.empty();
    if (params.size() != n_params_ || (want_grad && grad.size() != n_params_)) {
      throw std::invalid_argument("LossGraph::evaluate: parameter size mismatch");
    }
    LossBreakdown out;

    // equation residual columns
    std::fill(grad_eq_.begin(), grad_eq_.end(), 0.0);
    for (std::size_t i = 0; i < n_params_; ++i) col_tape_.set_leaf(col_params_[i], params[i]);
    double eq_sum = 0.0;
    const int n_steps = colloc_.time_grid.n_steps;
    for (std::size_t c = 0; c < colloc_.n_spatial; ++c) {
      const auto col = colloc_.spatial_column(c);
      for (std::size_t a = 0; a < col.size(); ++a) col_tape_.set_leaf(col_spatial_[a], col[a]);
      const double* src = col_sources_.data() + c * static_cast<std::size_t>(n_steps);
      for (int r = 0; r < n_steps; ++r) {
        col_tape_.set_leaf(col_source_leaves_[static_cast<std::size_t>(r)], src[r]);
      }
      col_tape_.forward();
      eq_sum += col_tape_.value_at(col_sum_sq_.index());
      if (want_grad) {
        col_tape_.backward(col_sum_sq_);
        for (std::size_t i = 0; i < n_params_; ++i) {
          grad_eq_[i] += col_tape_.adjoint(col_params_[i]);
        }
      }
    }
    const double n_eq = static_cast<double>(colloc_.n_eq());
    out.eq = eq_sum / n_eq;

    // pointwise IC/BC terms share one tape
    std::fill(grad_pt_.begin(), grad_pt_.end(), 0.0);
    for (std::size_t i = 0; i < n_params_; ++i) pt_tape_.set_leaf(pt_params_[i], params[i]);
    double ic_sum = 0.0;
    double bc_sum = 0.0;
    const std::size_t n_pts = pt_coords_data_.size() / static_cast<std::size_t>(colloc_.input_dim);
    for (std::size_t p = 0; p < n_pts; ++p) {
      const double* xy = pt_coords_data_.data() + p * static_cast<std::size_t>(colloc_.input_dim);
      for (int a = 0; a < colloc_.input_dim; ++a) {
        pt_tape_.set_leaf(pt_coords_[static_cast<std::size_t>(a)], xy[a]);
      }
      pt_tape_.set_leaf(pt_target_, pt_targets_[p]);
      pt_tape_.forward();
      const double sq = pt_tape_.value_at(pt_sq_.index());
      const bool is_ic = p < colloc_.n_ic;
      (is_ic ? ic_sum : bc_sum) += sq;
      if (want_grad) {
        pt_tape_.backward(pt_sq_);
        const double scale = is_ic ? ic_scale_ : bc_scale_;
        for (std::size_t i = 0; i < n_params_; ++i) {
          grad_pt_[i] += scale * pt_tape_.adjoint(pt_params_[i]);
        }
      }
    }
    out.ic = colloc_.n_ic > 0 ? ic_sum / static_cast<double>(colloc_.n_ic) : 0.0;
    out.bc = colloc_.n_bc > 0 ? bc_sum / static_cast<double>(colloc_.n_bc) : 0.0;
    out.total = out.eq + out.ic + out.bc;

    if (want_grad) {
      for (std::size_t i = 0; i < n_params_; ++i) {
        grad[i] = grad_eq_[i] / n_eq + grad_pt_[i];
      }
    }
    return out;
  }

 private:
  void build_column_tape() {
    const int sd = prob_.spatial_dims();
    const int n_steps = colloc_.time_grid.n_steps;
    col_tape_.reserve(1 << 12);
    col_params_.reserve(n_params_);
    for (std::size_t i = 0; i < n_params_; ++i) col_params_.push_back(col_tape_.leaf(0.0));
    for (int a = 0; a < sd; ++a) col_spatial_.push_back(col_tape_.leaf(0.0));
    for (int r = 0; r < n_steps; ++r) col_source_leaves_.push_back(col_tape_.leaf(0.0));

    const std::span<const ad::Var> params(col_params_);
    std::vector<ad::Var> u(static_cast<std::size_t>(n_steps) + 1);
    std::vector<ad::Var> laplacian(static_cast<std::size_t>(n_steps) + 1, ad::Var(0.0));

    if (sd == 0) {
      std::vector<ad::Var> in(1);
      for (int j = 0; j <= n_steps; ++j) {
        in[0] = ad::Var(colloc_.time_grid.t(j));
        u[static_cast<std::size_t>(j)] =
            Network::eval<ad::Var, ad::Var>(net_cfg_, params, std::span<const ad::Var>(in));
      }
    } else {
      std::vector<ad::Var> in(static_cast<std::size_t>(sd) + 1);
      for (int a = 0; a < sd; ++a) in[static_cast<std::size_t>(a)] = col_spatial_[static_cast<std::size_t>(a)];
      in.back() = ad::Var(0.0);
      u[0] = Network::eval<ad::Var, ad::Var>(net_cfg_, params, std::span<const ad::Var>(in));
      std::vector<ad::Jet2<ad::Var>> jin(static_cast<std::size_t>(sd) + 1);
      for (int j = 1; j <= n_steps; ++j) {
        for (int axis = 0; axis < sd; ++axis) {
          for (int a = 0; a < sd; ++a) {
            jin[static_cast<std::size_t>(a)] =
                (a == axis) ? ad::Jet2<ad::Var>::seed(col_spatial_[static_cast<std::size_t>(a)])
                            : ad::Jet2<ad::Var>(col_spatial_[static_cast<std::size_t>(a)]);
          }
          jin.back() = ad::Jet2<ad::Var>(ad::Var(colloc_.time_grid.t(j)));
          const auto jet = Network::eval<ad::Var, ad::Jet2<ad::Var>>(
              net_cfg_, params, std::span<const ad::Jet2<ad::Var>>(jin));
          if (axis == 0) {
            u[static_cast<std::size_t>(j)] = jet.v;
            laplacian[static_cast<std::size_t>(j)] = jet.d2;
          } else {
            laplacian[static_cast<std::size_t>(j)] =
                laplacian[static_cast<std::size_t>(j)] + jet.d2;
          }
        }
      }
    }

    ad::Var sum_sq(0.0);
    for (int r = 1; r <= n_steps; ++r) {
      const ad::Var d_alpha = ad::weighted_history(
          scheme_.row(r), std::span<const ad::Var>(u.data(), static_cast<std::size_t>(r) + 1));
      ad::Var res = d_alpha + u[static_cast<std::size_t>(r)];
      if (sd > 0) res = res - laplacian[static_cast<std::size_t>(r)];
      res = res - col_source_leaves_[static_cast<std::size_t>(r) - 1];
      sum_sq = ad::fmadd(sum_sq, res, res);
    }
    col_sum_sq_ = sum_sq;
  }

  void build_point_tape() {
    pt_params_.reserve(n_params_);
    for (std::size_t i = 0; i < n_params_; ++i) pt_params_.push_back(pt_tape_.leaf(0.0));
    for (int a = 0; a < colloc_.input_dim; ++a) pt_coords_.push_back(pt_tape_.leaf(0.0));
    pt_target_ = pt_tape_.leaf(0.0);
    const ad::Var u = Network::eval<ad::Var, ad::Var>(
        net_cfg_, std::span<const ad::Var>(pt_params_), std::span<const ad::Var>(pt_coords_));
    const ad::Var diff = u - pt_target_;
    pt_sq_ = diff * diff;
  }

  void precompute_leaf_data() {
    const int sd = prob_.spatial_dims();
    const int n_steps = colloc_.time_grid.n_steps;
    // per-column source samples at r = 1..N
    col_sources_.resize(colloc_.n_spatial * static_cast<std::size_t>(n_steps));
    std::vector<double> coords(static_cast<std::size_t>(sd) + 1);
    for (std::size_t c = 0; c < colloc_.n_spatial; ++c) {
      const auto col = colloc_.spatial_column(c);
      for (int a = 0; a < sd; ++a) coords[static_cast<std::size_t>(a)] = col[static_cast<std::size_t>(a)];
      for (int r = 1; r <= n_steps; ++r) {
        coords.back() = colloc_.time_grid.t(r);
        col_sources_[c * static_cast<std::size_t>(n_steps) + static_cast<std::size_t>(r - 1)] =
            prob_.source(coords);
      }
    }
    // IC followed by BC points (shared pointwise tape)
    ic_scale_ = colloc_.n_ic > 0 ? 1.0 / static_cast<double>(colloc_.n_ic) : 0.0;
    bc_scale_ = colloc_.n_bc > 0 ? 1.0 / static_cast<double>(colloc_.n_bc) : 0.0;
    const std::size_t dim = static_cast<std::size_t>(colloc_.input_dim);
    pt_coords_data_.reserve((colloc_.n_ic + colloc_.n_bc) * dim);
    pt_targets_.reserve(colloc_.n_ic + colloc_.n_bc);
    std::vector<double> spatial(static_cast<std::size_t>(sd));
    for (std::size_t i = 0; i < colloc_.n_ic; ++i) {
      for (int a = 0; a < sd; ++a) {
        spatial[static_cast<std::size_t>(a)] =
            colloc_.ic_points[i * static_cast<std::size_t>(sd) + static_cast<std::size_t>(a)];
        pt_coords_data_.push_back(spatial[static_cast<std::size_t>(a)]);
      }
      pt_coords_data_.push_back(0.0);  // t = 0
      pt_targets_.push_back(prob_.initial(spatial));
    }
    const auto faces = sd > 0 ? prob_.faces() : std::vector<BoundaryFace>{};
    for (std::size_t i = 0; i < colloc_.n_bc; ++i) {
      const double* xy = colloc_.bc_points.data() + i * dim;
      for (std::size_t a = 0; a < dim; ++a) pt_coords_data_.push_back(xy[a]);
      pt_targets_.push_back(
          prob_.boundary(faces[static_cast<std::size_t>(colloc_.bc_face[i])],
                         std::span<const double>(xy, dim)));
    }
  }

  const Problem& prob_;
  const NetworkConfig net_cfg_;
  const CollocationSet& colloc_;
  const CaputoScheme& scheme_;
  std::size_t n_params_ = 0;

  ad::Tape col_tape_;
  std::vector<ad::Var> col_params_;
  std::vector<ad::Var> col_spatial_;
  std::vector<ad::Var> col_source_leaves_;
  ad::Var col_sum_sq_;
  std::vector<double> col_sources_;

  ad::Tape pt_tape_;
  std::vector<ad::Var> pt_params_;
  std::vector<ad::Var> pt_coords_;
  ad::Var pt_target_;
  ad::Var pt_sq_;
  std::vector<double> pt_coords_data_;
  std::vector<double> pt_targets_;
  double ic_scale_ = 0.0;
  double bc_scale_ = 0.0;

  std::vector<double> grad_eq_;
  std::vector<double> grad_pt_;
};

}  // namespace detail

/// Network field adapter for residual evaluation and dense evaluation.
struct NetworkField {
  const Network* net;
  double value(std::span<const double> coords) const { return net->forward(coords); }
  ad::Jet2<double> jet(std::span<const double> coords, int axis) const {
    const auto d = second_spatial(*net, coords, axis);
    return {d.value, d.d1, d.d2};
  }
};

/// Exact full-batch loss (Eq-residual, IC and BC mean squared errors) via the
/// plain evaluation path. Matches the taped loss used inside train() to
/// floating-point roundoff.
inline LossBreakdown loss(const Network& net, const Problem& prob, const CollocationSet& colloc,
                          const CaputoScheme& scheme) {
  if (net.config.input_dim != prob.input_dim() || colloc.input_dim != prob.input_dim()) {
    throw std::invalid_argument("loss: dimension mismatch between network, problem and points");
  }
  LossBreakdown out;
  const NetworkField field{&net};
  double eq_sum = 0.0;
  for (std::size_t c = 0; c < colloc.n_spatial; ++c) {
    const auto res = discrete_residuals(prob, field, scheme, colloc.spatial_column(c));
    for (double r : res) eq_sum += r * r;
  }
  out.eq = eq_sum / static_cast<double>(colloc.n_eq());

  const int sd = prob.spatial_dims();
  if (colloc.n_ic > 0) {
    double s = 0.0;
    std::vector<double> coords(static_cast<std::size_t>(sd) + 1, 0.0);
    std::vector<double> spatial(static_cast<std::size_t>(sd));
    for (std::size_t i = 0; i < colloc.n_ic; ++i) {
      for (int a = 0; a < sd; ++a) {
        spatial[static_cast<std::size_t>(a)] =
            colloc.ic_points[i * static_cast<std::size_t>(sd) + static_cast<std::size_t>(a)];
        coords[static_cast<std::size_t>(a)] = spatial[static_cast<std::size_t>(a)];
      }
      coords.back() = 0.0;
      const double d = net.forward(coords) - prob.initial(spatial);
      s += d * d;
    }
    out.ic = s / static_cast<double>(colloc.n_ic);
  }
  if (colloc.n_bc > 0) {
    double s = 0.0;
    const auto faces = prob.faces();
    const std::size_t dim = static_cast<std::size_t>(colloc.input_dim);
    for (std::size_t i = 0; i < colloc.n_bc; ++i) {
      const std::span<const double> coords(colloc.bc_points.data() + i * dim, dim);
      const double d =
          net.forward(coords) -
          prob.boundary(faces[static_cast<std::size_t>(colloc.bc_face[i])], coords);
      s += d * d;
    }
    out.bc = s / static_cast<double>(colloc.n_bc);
  }
  out.total = out.eq + out.ic + out.bc;
  return out;
}

// ---- dense evaluation ------------------------------------------------------

/// Dense uniform evaluation against the analytical solution.
struct EvalTable {
  int input_dim = 1;
  std::vector<double> coords;  // flattened, time-major rows
  std::vector<double> u_nn;
  std::vector<double> u_exact;
  ErrorMetrics overall;
  std::vector<std::pair<double, ErrorMetrics>> time_slices;  // one entry per time node
};

/// Evaluate a field on an explicit tensor grid of axis values (spatial axes
/// first, time last). Slicing tools pin an axis by passing a single value.
template <class F>
EvalTable evaluate_axes(const F& u_fn, const Problem& prob,
                        const std::vector<std::vector<double>>& axes_with_time) {
  const int sd = prob.spatial_dims();
  if (axes_with_time.size() != static_cast<std::size_t>(sd) + 1) {
    throw std::invalid_argument("evaluate: need one axis value list per axis (spatial..., time)");
  }
  for (const auto& ax : axes_with_time) {
    if (ax.empty()) throw std::invalid_argument("evaluate: axis value lists must be non-empty");
  }
  const std::vector<std::vector<double>> axes(axes_with_time.begin(), axes_with_time.end() - 1);
  const std::vector<double>& ts = axes_with_time.back();
  std::size_t n_spatial = 1;
  for (const auto& ax : axes) n_spatial *= ax.size();

  EvalTable table;
  table.input_dim = sd + 1;
  table.coords.reserve(ts.size() * n_spatial * static_cast<std::size_t>(sd + 1));
  std::vector<double> coords(static_cast<std::size_t>(sd) + 1);
  for (double t : ts) {
    double slice_diff_sq = 0.0, slice_ref_sq = 0.0, slice_max = 0.0;
    for (std::size_t c = 0; c < n_spatial; ++c) {
      std::size_t rem = c;
      for (int a = sd - 1; a >= 0; --a) {
        coords[static_cast<std::size_t>(a)] = axes[static_cast<std::size_t>(a)][rem % axes[static_cast<std::size_t>(a)].size()];
        rem /= axes[static_cast<std::size_t>(a)].size();
      }
      coords.back() = t;
      const double pred = u_fn(std::span<const double>(coords));
      const double exact = prob.analytical(coords);
      table.coords.insert(table.coords.end(), coords.begin(), coords.end());
      table.u_nn.push_back(pred);
      table.u_exact.push_back(exact);
      const double d = pred - exact;
      slice_diff_sq += d * d;
      slice_ref_sq += exact * exact;
      slice_max = std::max(slice_max, std::abs(d));
    }
    ErrorMetrics slice;
    slice.max_abs = slice_max;
    slice.n_points = n_spatial;
    slice.rel_l2 = slice_ref_sq > 0.0 ? std::sqrt(slice_diff_sq) / std::sqrt(slice_ref_sq)
                                      : std::sqrt(slice_diff_sq);
    table.time_slices.emplace_back(t, slice);
  }
  table.overall = error_metrics(table.u_nn, table.u_exact);
  return table;
}

template <class F>
EvalTable evaluate_field(const F& u_fn, const Problem& prob, std::span<const int> grid_counts) {
  const int sd = prob.spatial_dims();
  if (grid_counts.size() != static_cast<std::size_t>(sd) + 1) {
    throw std::invalid_argument("evaluate: need one grid count per axis (spatial..., time)");
  }
  for (int c : grid_counts) {
    if (c < 2) throw std::invalid_argument("evaluate: every axis needs at least two nodes");
  }
  std::vector<std::vector<double>> axes;
  for (int a = 0; a < sd; ++a) {
    axes.push_back(detail::linspace(prob.domain.spatial_box[static_cast<std::size_t>(a)][0],
                                    prob.domain.spatial_box[static_cast<std::size_t>(a)][1],
                                    grid_counts[static_cast<std::size_t>(a)]));
  }
  axes.push_back(detail::linspace(0.0, prob.domain.t_end, grid_counts.back()));
  return evaluate_axes(u_fn, prob, axes);
}

inline EvalTable evaluate(const Network& net, const Problem& prob,
                          std::span<const int> grid_counts) {
  if (net.config.input_dim != prob.input_dim()) {
    throw std::invalid_argument("evaluate: network input dimension does not match problem");
  }
  return evaluate_field([&net](std::span<const double> c) { return net.forward(c); }, prob,
                        grid_counts);
}

inline std::vector<int> default_eval_grid(const Problem& prob) {
  switch (prob.name) {
    case ProblemName::FODE: return {101};
    case ProblemName::FPDE2D: return {41, 41};
    case ProblemName::FPDE3D: return {21, 21, 11};
  }
  return {101};
}

inline void write_eval_csv(const EvalTable& table, std::ostream& out) {
  const char* headers[3] = {"t,u_nn,u_exact,abs_err", "x,t,u_nn,u_exact,abs_err",
                            "x,y,t,u_nn,u_exact,abs_err"};
  out << headers[table.input_dim - 1] << '\n';
  char buf[40];
  const std::size_t n = table.u_nn.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < table.input_dim; ++a) {
      std::snprintf(buf, sizeof buf, "%.12g",
                    table.coords[i * static_cast<std::size_t>(table.input_dim) + static_cast<std::size_t>(a)]);
      out << buf << ',';
    }
    std::snprintf(buf, sizeof buf, "%.17g", table.u_nn[i]);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", table.u_exact[i]);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", std::abs(table.u_nn[i] - table.u_exact[i]));
    out << buf << '\n';
  }
}

// ---- training --------------------------------------------------------------

/// Full-batch Adam training of the network against the fPINN loss. The run is
/// deterministic: identical (network, config, collocation) inputs reproduce
/// the loss trace bitwise. Training aborts with a diagnostic if the loss ever
/// becomes non-finite.
inline TrainReport train(Network& net, const Problem& prob, const CollocationSet& colloc,
                         const TrainConfig& cfg, const TrainIO& io = {}) {
  cfg.validate();
  if (net.config.input_dim != prob.input_dim()) {
    throw std::invalid_argument("train: network input dimension does not match problem");
  }
  const CaputoScheme scheme = CaputoScheme::build(cfg.scheme_kind, prob.alpha, colloc.time_grid);
  detail::LossGraph graph(prob, net.config, colloc, scheme);
  detail::Adam adam(net.params.size());
  std::vector<double> grad(net.params.size(), 0.0);

  TrainReport report;
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  if (io.trace_csv != nullptr) {
    *io.trace_csv << "iter,phi_eq,phi_ic,phi_bc,phi_total,lr,elapsed_s\n";
  }
  char buf[40];
  auto emit = [&](const TraceEntry& e) {
    report.loss_trace.push_back(e);
    if (io.trace_csv != nullptr) {
      auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        *io.trace_csv << buf << sep;
      };
      *io.trace_csv << e.iter << ',';
      put(e.phi_eq, ',');
      put(e.phi_ic, ',');
      put(e.phi_bc, ',');
      put(e.phi_total, ',');
      put(e.lr, ',');
      std::snprintf(buf, sizeof buf, "%.6f", e.elapsed_s);
      *io.trace_csv << buf << '\n';
    }
  };
  auto maybe_checkpoint = [&](long updates) {
    if (io.checkpoint_every > 0 && !io.checkpoint_dir.empty() && updates > 0 &&
        updates % io.checkpoint_every == 0) {
      std::ofstream out(std::filesystem::path(io.checkpoint_dir) /
                        ("checkpoint_" + std::to_string(updates) + ".txt"));
      net.save(out);
    }
  };

  long updates = 0;
  for (;;) {
    const LossBreakdown parts = graph.evaluate(net.params, grad);
    TraceEntry entry;
    entry.iter = updates;
    entry.phi_eq = parts.eq;
    entry.phi_ic = parts.ic;
    entry.phi_bc = parts.bc;
    entry.phi_total = parts.eq + parts.ic + parts.bc;
    entry.lr = cfg.lr_at(updates + 1);
    entry.elapsed_s = elapsed();
    emit(entry);

    if (!std::isfinite(entry.phi_total)) {
      report.diverged = true;
      report.diagnostic = "non-finite loss at iteration " + std::to_string(updates);
      break;
    }
    if (cfg.loss_tolerance > 0.0 && entry.phi_total <= cfg.loss_tolerance) break;
    if (cfg.max_iters > 0 && updates >= cfg.max_iters) break;
    if (cfg.max_wall_seconds > 0.0 && entry.elapsed_s >= cfg.max_wall_seconds) break;

    adam.step(net.params, grad, entry.lr);
    ++updates;
    maybe_checkpoint(updates);
  }

  report.iterations = updates;
  report.wall_seconds = elapsed();
  if (!report.diverged) {
    const std::vector<int> eval_grid = io.eval_grid.empty() ? default_eval_grid(prob) : io.eval_grid;
    report.final_metrics = evaluate(net, prob, eval_grid).overall;
  }
  return report;
}

}  // namespace fpinn
