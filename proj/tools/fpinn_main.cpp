// fpinn command-line front end: discrete fractional-derivative evaluation,
// single training runs, checkpoint evaluation, and experiment sweeps.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fpinn/caputo.hpp"
#include "fpinn/run_config.hpp"
#include "fpinn/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> axis_names(int input_dim) {
  switch (input_dim) {
    case 1: return {"t"};
    case 2: return {"x", "t"};
    default: return {"x", "y", "t"};
  }
}

void print_metrics(const fpinn::ErrorMetrics& m) {
  nlohmann::json j{{"rel_l2", m.rel_l2}, {"max_abs", m.max_abs}, {"n_points", m.n_points}};
  std::cout << j.dump() << "\n";
}

// ---- caputo-eval -------------------------------------------------------------

int cmd_caputo_eval(const std::string& scheme_name, double alpha, double h, double t_final,
                    std::optional<double> monomial, const std::string& samples_path,
                    bool order_mode, int levels, const std::string& out_path) {
  const fpinn::SchemeKind kind = fpinn::scheme_from_string(scheme_name);
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("--alpha must lie strictly inside (0,1)");
  }
  if (!(h > 0.0)) throw ValidationError("--h must be positive");
  if (monomial.has_value() == !samples_path.empty()) {
    throw ValidationError("specify exactly one of --monomial or --samples");
  }

  if (order_mode) {
    if (!monomial) throw ValidationError("--order requires --monomial");
    if (levels < 3) throw ValidationError("--levels must be at least 3");
    std::vector<double> hs;
    for (int i = 0; i < levels; ++i) hs.push_back(h / std::pow(2.0, i));
    std::ostringstream table;
    table << "h,abs_error\n";
    const double exact = fpinn::exact_caputo_monomial(*monomial, alpha, t_final);
    for (double hi : hs) {
      const int n = static_cast<int>(std::llround(t_final / hi));
      const fpinn::TimeGrid grid(hi, n);
      const auto scheme = fpinn::CaputoScheme::build(kind, alpha, grid);
      std::vector<double> values(static_cast<std::size_t>(n) + 1);
      for (int i = 0; i <= n; ++i) values[static_cast<std::size_t>(i)] = std::pow(grid.t(i), *monomial);
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.10g,%.17g\n", hi, std::abs(scheme.apply(values, n) - exact));
      table << buf;
    }
    const double slope = fpinn::observed_order(kind, alpha, *monomial, t_final, hs);
    table << "observed_order," << slope << "\n";
    std::cout << table.str();
    if (!out_path.empty()) {
      std::ofstream out(out_path);
      out << table.str();
    }
    return kExitOk;
  }

  std::vector<double> values;
  double report_exact_power = 0.0;
  bool have_exact = false;
  int n_steps = 0;
  if (monomial) {
    n_steps = static_cast<int>(std::llround(t_final / h));
    if (n_steps < 1 || std::abs(n_steps * h - t_final) > 1e-9 * t_final) {
      throw ValidationError("--t-final must be a positive integer multiple of --h");
    }
    const fpinn::TimeGrid grid(h, n_steps);
    values.resize(static_cast<std::size_t>(n_steps) + 1);
    for (int i = 0; i <= n_steps; ++i) {
      values[static_cast<std::size_t>(i)] = std::pow(grid.t(i), *monomial);
    }
    report_exact_power = *monomial;
    have_exact = true;
  } else {
    std::ifstream in(samples_path);
    if (!in) throw ValidationError("cannot open samples file '" + samples_path + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        std::size_t pos = 0;
        const double v = std::stod(line, &pos);
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\r')) ++pos;
        if (pos != line.size()) throw std::invalid_argument("trailing characters");
        values.push_back(v);
      } catch (const std::exception&) {
        throw ValidationError("malformed samples file at line " + std::to_string(line_no));
      }
    }
    if (values.size() < 2) throw ValidationError("samples file needs at least two values");
    n_steps = static_cast<int>(values.size()) - 1;
  }

  const fpinn::TimeGrid grid(h, n_steps);
  const auto scheme = fpinn::CaputoScheme::build(kind, alpha, grid);
  std::ostringstream table;
  table << (have_exact ? "r,t,discrete,exact,abs_error\n" : "r,t,discrete\n");
  for (int r = 1; r <= n_steps; ++r) {
    const double d = scheme.apply(values, r);
    char buf[160];
    if (have_exact) {
      const double ex = fpinn::exact_caputo_monomial(report_exact_power, alpha, grid.t(r));
      std::snprintf(buf, sizeof buf, "%d,%.10g,%.17g,%.17g,%.17g\n", r, grid.t(r), d, ex,
                    std::abs(d - ex));
    } else {
      std::snprintf(buf, sizeof buf, "%d,%.10g,%.17g\n", r, grid.t(r), d);
    }
    table << buf;
  }
  std::cout << table.str();
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << table.str();
  }
  return kExitOk;
}

// ---- train ---------------------------------------------------------------------

int cmd_train(const std::string& preset_name, const std::string& config_path,
              const std::string& scheme_override, std::optional<std::uint64_t> seed_override,
              std::optional<long> max_iters_override, std::optional<double> window_override,
              const std::string& out_override) {
  fpinn::RunConfig cfg;
  std::vector<std::string> errs;
  if (!preset_name.empty()) cfg = fpinn::preset(preset_name);
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ValidationError("cannot open config file '" + config_path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    cfg = fpinn::run_config_from_json(j, cfg, errs);
  }
  if (!scheme_override.empty()) cfg.scheme = scheme_override;
  if (seed_override) cfg.seed = *seed_override;
  if (max_iters_override) cfg.max_iters = *max_iters_override;
  if (window_override) cfg.time_window = *window_override;
  if (!out_override.empty()) cfg.output_dir = out_override;

  for (const auto& e : cfg.validation_errors()) errs.push_back(e);
  if (!errs.empty()) {
    std::cerr << "config validation failed:\n";
    for (const auto& e : errs) std::cerr << "  - " << e << "\n";
    return kExitValidation;
  }

  const fpinn::RunResult result = fpinn::execute_run(cfg);
  if (!result.ok) {
    std::cerr << "run failed: " << result.error << "\n";
    return kExitRuntime;
  }
  std::cout << fpinn::summary_json(result)["result"].dump(2) << "\n";
  std::cerr << "artifacts written to " << fpinn::resolve_output_dir(cfg.output_dir).string()
            << "\n";
  return kExitOk;
}

// ---- eval ----------------------------------------------------------------------

int cmd_eval(const std::string& checkpoint_path, const std::string& problem_name, double alpha,
             std::optional<double> window, std::vector<int> grid,
             const std::vector<std::string>& fixes, bool oracle, const std::string& out_path) {
  const fpinn::Problem prob = window ? fpinn::Problem::make(fpinn::problem_from_string(problem_name), alpha, *window)
                                     : fpinn::Problem::make(fpinn::problem_from_string(problem_name), alpha);

  fpinn::Network net;
  if (!oracle) {
    std::ifstream in(checkpoint_path);
    if (!in) throw ValidationError("cannot open checkpoint '" + checkpoint_path + "'");
    try {
      net = fpinn::Network::load(in);
    } catch (const std::exception& e) {
      std::cerr << "corrupt checkpoint: " << e.what() << "\n";
      return kExitRuntime;
    }
    if (net.config.input_dim != prob.input_dim()) {
      throw ValidationError("checkpoint input dimension does not match --problem");
    }
  }

  if (grid.empty()) grid = fpinn::default_eval_grid(prob);
  if (grid.size() != static_cast<std::size_t>(prob.input_dim())) {
    throw ValidationError("--grid needs one count per axis (spatial..., time)");
  }

  // axis value lists; --fix pins an axis to one coordinate
  const auto names = axis_names(prob.input_dim());
  std::vector<std::vector<double>> axes;
  for (int a = 0; a < prob.input_dim(); ++a) {
    const double lo = a < prob.spatial_dims() ? prob.domain.spatial_box[static_cast<std::size_t>(a)][0] : 0.0;
    const double hi = a < prob.spatial_dims() ? prob.domain.spatial_box[static_cast<std::size_t>(a)][1]
                                              : prob.domain.t_end;
    if (grid[static_cast<std::size_t>(a)] < 2) {
      throw ValidationError("--grid entries must be >= 2");
    }
    axes.push_back(fpinn::detail::linspace(lo, hi, grid[static_cast<std::size_t>(a)]));
  }
  for (const auto& fix : fixes) {
    const auto eq = fix.find('=');
    if (eq == std::string::npos) throw ValidationError("--fix expects axis=value");
    const std::string name = fix.substr(0, eq);
    double value = 0.0;
    try {
      value = std::stod(fix.substr(eq + 1));
    } catch (const std::exception&) {
      throw ValidationError("--fix expects a numeric value");
    }
    bool found = false;
    for (std::size_t a = 0; a < names.size(); ++a) {
      if (names[a] == name) {
        axes[a] = {value};
        found = true;
      }
    }
    if (!found) throw ValidationError("--fix axis '" + name + "' not in this problem");
  }

  auto field = [&](std::span<const double> c) {
    return oracle ? prob.analytical(c) : net.forward(c);
  };
  const fpinn::EvalTable table = fpinn::evaluate_axes(field, prob, axes);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    fpinn::write_eval_csv(table, out);
  } else {
    fpinn::write_eval_csv(table, std::cout);
  }
  print_metrics(table.overall);
  return kExitOk;
}

// ---- sweep ---------------------------------------------------------------------

int cmd_sweep(const std::string& spec_path, std::optional<int> jobs_override,
              const std::string& out_override) {
  std::ifstream in(spec_path);
  if (!in) throw ValidationError("cannot open sweep spec '" + spec_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ValidationError(std::string("sweep spec is not valid JSON: ") + e.what());
  }
  std::vector<std::string> errs;
  fpinn::SweepSpec spec = fpinn::sweep_from_json(j, errs);
  if (jobs_override) spec.jobs = *jobs_override;
  if (!out_override.empty()) spec.base.output_dir = out_override;
  if (errs.empty()) {
    for (const auto& e : spec.base.validation_errors()) errs.push_back(e);
    if (errs.empty()) {
      // every child must also be constructible and valid
      for (const auto& v : spec.values) {
        try {
          const auto child = fpinn::sweep_child(spec, v);
          for (const auto& e : child.validation_errors()) {
            errs.push_back("value " + v.dump() + ": " + e);
          }
        } catch (const std::exception& e) {
          errs.push_back("value " + v.dump() + ": " + e.what());
        }
      }
    }
  }
  if (!errs.empty()) {
    std::cerr << "sweep spec validation failed:\n";
    for (const auto& e : errs) std::cerr << "  - " << e << "\n";
    return kExitValidation;
  }

  const fpinn::SweepOutcome outcome = fpinn::execute_sweep(spec);
  const auto dir = fpinn::resolve_output_dir(
      spec.base.output_dir.empty() ? std::string("runs/sweep") : spec.base.output_dir);
  std::filesystem::create_directories(dir);
  std::ofstream summary(dir / "summary.csv");
  fpinn::write_sweep_summary(spec, outcome, summary);
  {
    std::ostringstream echo;
    fpinn::write_sweep_summary(spec, outcome, echo);
    std::cout << echo.str();
  }
  for (const auto& child : outcome.children) {
    if (!child.ok) std::cerr << "child " << child.config.output_dir << " failed: " << child.error << "\n";
  }
  return outcome.all_ok ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fpinn: fractional physics-informed neural network benchmark toolkit"};
  app.set_help_flag("--help", "print help and exit");  // frees -h for --h below
  app.require_subcommand(1);

  // caputo-eval
  auto* ce = app.add_subcommand("caputo-eval",
                                "evaluate discrete Caputo derivatives and convergence orders");
  std::string ce_scheme = "diethelm";
  double ce_alpha = 0.5, ce_h = 0.01, ce_tfinal = 1.0;
  std::optional<double> ce_monomial;
  std::string ce_samples, ce_out;
  bool ce_order = false;
  int ce_levels = 4;
  ce->add_option("--scheme", ce_scheme, "diethelm or l1");
  ce->add_option("--alpha", ce_alpha, "fractional order in (0,1)");
  ce->add_option("--h", ce_h, "grid spacing");
  ce->add_option("--t-final", ce_tfinal, "end of the time window");
  ce->add_option("--monomial", ce_monomial, "test function t^p (power p)");
  ce->add_option("--samples", ce_samples, "file with one sample per line on the uniform grid");
  ce->add_flag("--order", ce_order, "report the observed convergence order over halving grids");
  ce->add_option("--levels", ce_levels, "number of halving levels for --order");
  ce->add_option("--out", ce_out, "also write the table to this CSV file");

  // train
  auto* tr = app.add_subcommand("train", "train a network on one benchmark problem");
  std::string tr_preset, tr_config, tr_scheme, tr_out;
  std::optional<std::uint64_t> tr_seed;
  std::optional<long> tr_max_iters;
  std::optional<double> tr_window;
  tr->add_option("--preset", tr_preset, "fode, fpde2d or fpde3d");
  tr->add_option("--config", tr_config, "JSON run config (overrides the preset)");
  tr->add_option("--scheme", tr_scheme, "override: diethelm or l1");
  tr->add_option("--seed", tr_seed, "override the initialization seed");
  tr->add_option("--max-iters", tr_max_iters, "override the iteration budget");
  tr->add_option("--time-window", tr_window, "override the time window [0,T]");
  tr->add_option("--out", tr_out, "output directory");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dense grid");
  std::string ev_ck, ev_problem = "fode", ev_out;
  double ev_alpha = 0.5;
  std::optional<double> ev_window;
  std::vector<int> ev_grid;
  std::vector<std::string> ev_fixes;
  bool ev_oracle = false;
  ev->add_option("--checkpoint", ev_ck, "checkpoint file written by train");
  ev->add_option("--problem", ev_problem, "problem for the analytical reference");
  ev->add_option("--alpha", ev_alpha, "fractional order");
  ev->add_option("--time-window", ev_window, "time window override");
  ev->add_option("--grid", ev_grid, "per-axis node counts")->delimiter(',');
  ev->add_option("--fix", ev_fixes, "pin an axis, e.g. --fix x=1.0 (repeatable)");
  ev->add_flag("--oracle", ev_oracle, "evaluate the analytical solution instead of a checkpoint");
  ev->add_option("--out", ev_out, "write the evaluation CSV here (default: stdout)");

  // sweep
  auto* sw = app.add_subcommand("sweep", "run an experiment matrix from a sweep spec");
  std::string sw_spec, sw_out;
  std::optional<int> sw_jobs;
  sw->add_option("--spec", sw_spec, "JSON sweep spec")->required();
  sw->add_option("--jobs", sw_jobs, "max concurrent child runs");
  sw->add_option("--out", sw_out, "override the sweep output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (ce->parsed()) {
      return cmd_caputo_eval(ce_scheme, ce_alpha, ce_h, ce_tfinal, ce_monomial, ce_samples,
                             ce_order, ce_levels, ce_out);
    }
    if (tr->parsed()) {
      if (tr_preset.empty() && tr_config.empty()) {
        throw ValidationError("train needs --preset and/or --config");
      }
      return cmd_train(tr_preset, tr_config, tr_scheme, tr_seed, tr_max_iters, tr_window, tr_out);
    }
    if (ev->parsed()) {
      if (!ev_oracle && ev_ck.empty()) {
        throw ValidationError("eval needs --checkpoint (or --oracle)");
      }
      return cmd_eval(ev_ck, ev_problem, ev_alpha, ev_window, ev_grid, ev_fixes, ev_oracle,
                      ev_out);
    }
    if (sw->parsed()) {
      return cmd_sweep(sw_spec, sw_jobs, sw_out);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
