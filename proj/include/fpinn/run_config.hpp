#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fpinn/collocation.hpp"
#include "fpinn/network.hpp"
#include "fpinn/problems.hpp"
#include "fpinn/trainer.hpp"

namespace fpinn {

using nlohmann::json;

/// A fully serializable description of one training run. A run is
/// reconstructible from this record alone.
struct RunConfig {
  std::string problem = "fode";
  double alpha = 0.5;
  std::string scheme = "diethelm";

  int hidden_layers = 3;
  int neurons_per_layer = 10;
  std::uint64_t seed = 42;

  std::vector<int> points_per_axis{30};
  int ic_points = 30;
  int bc_points = 0;

  std::vector<double> learning_rates{0.01, 0.001, 0.0005};
  std::vector<long> lr_change_iters{200, 1000};
  long max_iters = 5000;
  double max_wall_seconds = 0.0;
  double loss_tolerance = 0.0;
  long checkpoint_every = 0;

  std::vector<int> eval_grid;   // empty = per-problem default
  double time_window = 0.0;     // 0 = per-problem default
  std::string output_dir;

  ProblemName problem_name() const { return problem_from_string(problem); }
  SchemeKind scheme_kind() const { return scheme_from_string(scheme); }

  Problem make_problem() const {
    return time_window > 0.0 ? Problem::make(problem_name(), alpha, time_window)
                             : Problem::make(problem_name(), alpha);
  }

  NetworkConfig network_config() const {
    NetworkConfig nc;
    nc.input_dim = make_problem().input_dim();
    nc.hidden_layers = hidden_layers;
    nc.neurons_per_layer = neurons_per_layer;
    nc.seed = seed;
    return nc;
  }

  CollocationConfig collocation_config() const {
    CollocationConfig cc;
    cc.points_per_axis = points_per_axis;
    cc.ic_points = ic_points;
    cc.bc_points = bc_points;
    return cc;
  }

  TrainConfig train_config() const {
    TrainConfig tc;
    tc.lr_values = learning_rates;
    tc.lr_change_iters = lr_change_iters;
    tc.max_iters = max_iters;
    tc.max_wall_seconds = max_wall_seconds;
    tc.loss_tolerance = loss_tolerance;
    tc.seed = seed;
    tc.scheme_kind = scheme_kind();
    return tc;
  }

  /// All validation problems at once, so a bad config fails with the complete
  /// list instead of the first hit.
  std::vector<std::string> validation_errors() const {
    std::vector<std::string> errs;
    int dims = 0;
    try {
      dims = Problem::make(problem_from_string(problem)).input_dim();
    } catch (const std::exception& e) {
      errs.emplace_back(e.what());
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
      errs.push_back("alpha must lie strictly inside (0,1), got " + std::to_string(alpha));
    }
    try {
      scheme_from_string(scheme);
    } catch (const std::exception& e) {
      errs.emplace_back(e.what());
    }
    if (hidden_layers < 1) errs.push_back("network.hidden_layers must be >= 1");
    if (neurons_per_layer < 1) errs.push_back("network.neurons_per_layer must be >= 1");
    if (dims > 0 && points_per_axis.size() != static_cast<std::size_t>(dims)) {
      errs.push_back("collocation.points_per_axis must have " + std::to_string(dims) +
                     " entries for problem '" + problem + "'");
    }
    for (int c : points_per_axis) {
      if (c < 2) {
        errs.push_back("collocation.points_per_axis entries must be >= 2");
        break;
      }
    }
    if (ic_points < 0) errs.push_back("collocation.ic_points must be >= 0");
    if (bc_points < 0) errs.push_back("collocation.bc_points must be >= 0");
    if (learning_rates.empty()) errs.push_back("train.learning_rates must not be empty");
    for (double lr : learning_rates) {
      if (!(lr > 0.0)) {
        errs.push_back("train.learning_rates entries must be positive");
        break;
      }
    }
    if (lr_change_iters.size() + 1 != learning_rates.size()) {
      errs.push_back("train.lr_change_iters must have exactly one entry fewer than learning_rates");
    }
    if (max_iters <= 0 && max_wall_seconds <= 0.0) {
      errs.push_back("train needs a positive max_iters and/or max_wall_seconds budget");
    }
    if (loss_tolerance < 0.0) errs.push_back("train.loss_tolerance must be >= 0");
    if (time_window < 0.0) errs.push_back("time_window must be >= 0 (0 selects the default)");
    if (!eval_grid.empty()) {
      if (dims > 0 && eval_grid.size() != static_cast<std::size_t>(dims)) {
        errs.push_back("eval_grid must have " + std::to_string(dims) + " entries");
      }
      for (int c : eval_grid) {
        if (c < 2) {
          errs.push_back("eval_grid entries must be >= 2");
          break;
        }
      }
    }
    return errs;
  }
};

// ---- JSON (de)serialization with strict unknown-key rejection ---------------

namespace detail {

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                                const std::string& scope, std::vector<std::string>& errs) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) errs.push_back("unknown key '" + scope + key + "'");
  }
}

template <class T>
void read_field(const json& j, const char* key, T& out, const std::string& scope,
                std::vector<std::string>& errs) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const std::exception&) {
    errs.push_back("key '" + scope + key + "' has the wrong type");
  }
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
  json j;
  j["problem"] = c.problem;
  j["alpha"] = c.alpha;
  j["scheme"] = c.scheme;
  j["network"] = {{"hidden_layers", c.hidden_layers},
                  {"neurons_per_layer", c.neurons_per_layer},
                  {"seed", c.seed}};
  j["collocation"] = {{"points_per_axis", c.points_per_axis},
                      {"ic_points", c.ic_points},
                      {"bc_points", c.bc_points}};
  j["train"] = {{"learning_rates", c.learning_rates},
                {"lr_change_iters", c.lr_change_iters},
                {"max_iters", c.max_iters},
                {"max_wall_seconds", c.max_wall_seconds},
                {"loss_tolerance", c.loss_tolerance},
                {"checkpoint_every", c.checkpoint_every}};
  j["eval_grid"] = c.eval_grid;
  j["time_window"] = c.time_window;
  j["output_dir"] = c.output_dir;
  return j;
}

/// Parse a config on top of `base` (strict keys, all errors collected).
/// Every section and field is optional, which is what preset overrides need;
/// full configs simply specify everything.
inline RunConfig run_config_from_json(const json& j, const RunConfig& base,
                                      std::vector<std::string>& errs) {
  RunConfig c = base;
  if (!j.is_object()) {
    errs.push_back("run config must be a JSON object");
    return c;
  }
  detail::reject_unknown_keys(j,
                              {"problem", "alpha", "scheme", "network", "collocation", "train",
                               "eval_grid", "time_window", "output_dir"},
                              "", errs);
  detail::read_field(j, "problem", c.problem, "", errs);
  detail::read_field(j, "alpha", c.alpha, "", errs);
  detail::read_field(j, "scheme", c.scheme, "", errs);
  if (j.contains("network")) {
    const json& n = j.at("network");
    detail::reject_unknown_keys(n, {"hidden_layers", "neurons_per_layer", "seed"}, "network.",
                                errs);
    detail::read_field(n, "hidden_layers", c.hidden_layers, "network.", errs);
    detail::read_field(n, "neurons_per_layer", c.neurons_per_layer, "network.", errs);
    detail::read_field(n, "seed", c.seed, "network.", errs);
  }
  if (j.contains("collocation")) {
    const json& n = j.at("collocation");
    detail::reject_unknown_keys(n, {"points_per_axis", "ic_points", "bc_points"}, "collocation.",
                                errs);
    detail::read_field(n, "points_per_axis", c.points_per_axis, "collocation.", errs);
    detail::read_field(n, "ic_points", c.ic_points, "collocation.", errs);
    detail::read_field(n, "bc_points", c.bc_points, "collocation.", errs);
  }
  if (j.contains("train")) {
    const json& n = j.at("train");
    detail::reject_unknown_keys(n,
                                {"learning_rates", "lr_change_iters", "max_iters",
                                 "max_wall_seconds", "loss_tolerance", "checkpoint_every"},
                                "train.", errs);
    detail::read_field(n, "learning_rates", c.learning_rates, "train.", errs);
    detail::read_field(n, "lr_change_iters", c.lr_change_iters, "train.", errs);
    detail::read_field(n, "max_iters", c.max_iters, "train.", errs);
    detail::read_field(n, "max_wall_seconds", c.max_wall_seconds, "train.", errs);
    detail::read_field(n, "loss_tolerance", c.loss_tolerance, "train.", errs);
    detail::read_field(n, "checkpoint_every", c.checkpoint_every, "train.", errs);
  }
  detail::read_field(j, "eval_grid", c.eval_grid, "", errs);
  detail::read_field(j, "time_window", c.time_window, "", errs);
  detail::read_field(j, "output_dir", c.output_dir, "", errs);
  return c;
}

/// Presets encoding the benchmark hyperparameter table verbatim (fractional
/// order, learning-rate schedule with its change iterations, architecture and
/// point counts per problem).
inline RunConfig preset(const std::string& name) {
  RunConfig c;
  if (name == "fode") {
    c.problem = "fode";
    c.hidden_layers = 3;
    c.neurons_per_layer = 10;
    c.points_per_axis = {30};
    c.ic_points = 30;
    c.bc_points = 0;
    c.learning_rates = {0.01, 0.001, 0.0005};
    c.lr_change_iters = {200, 1000};
    c.max_iters = 5000;
    c.eval_grid = {101};
    c.output_dir = "runs/fode";
  } else if (name == "fpde2d") {
    c.problem = "fpde2d";
    c.hidden_layers = 4;
    c.neurons_per_layer = 20;
    c.points_per_axis = {10, 10};
    c.ic_points = 100;
    c.bc_points = 100;
    c.learning_rates = {0.01, 0.005, 0.001};
    c.lr_change_iters = {2000, 5000};
    c.max_iters = 100000;
    c.loss_tolerance = 1e-5;
    c.eval_grid = {41, 41};
    c.output_dir = "runs/fpde2d";
  } else if (name == "fpde3d") {
    c.problem = "fpde3d";
    c.hidden_layers = 4;
    c.neurons_per_layer = 20;
    c.points_per_axis = {5, 5, 5};
    c.ic_points = 5;
    c.bc_points = 25;
    c.learning_rates = {0.01, 0.005, 0.001};
    c.lr_change_iters = {2000, 5000};
    c.max_iters = 20000;
    c.eval_grid = {21, 21, 11};
    c.output_dir = "runs/fpde3d";
  } else {
    throw std::invalid_argument("unknown preset '" + name + "' (fode, fpde2d, fpde3d)");
  }
  return c;
}

/// Time stamps at which per-slice errors are reported in summaries.
inline std::vector<double> report_timestamps(ProblemName name) {
  switch (name) {
    case ProblemName::FODE: return {};
    case ProblemName::FPDE2D: return {0.1, 0.5, 1.0};
    case ProblemName::FPDE3D: return {0.1, 0.3, 0.5};
  }
  return {};
}

// ---- run execution -----------------------------------------------------------

struct SliceMetric {
  double t = 0.0;
  double rel_l2 = 0.0;
  double max_abs = 0.0;
};

struct RunResult {
  RunConfig config;
  bool ok = false;
  std::string error;
  long iterations = 0;
  double wall_seconds = 0.0;
  LossBreakdown final_loss;
  ErrorMetrics metrics;
  std::vector<SliceMetric> slices;
  Network network;
};

inline std::filesystem::path resolve_output_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  if (p.is_relative()) {
    if (const char* root = std::getenv("FPINN_OUTPUT_ROOT")) {
      p = std::filesystem::path(root) / p;
    }
  }
  return p;
}

inline json summary_json(const RunResult& r) {
  json j;
  j["config"] = to_json(r.config);
  json res;
  res["status"] = r.ok ? "ok" : "failed";
  if (!r.error.empty()) res["diagnostic"] = r.error;
  res["iterations"] = r.iterations;
  res["wall_seconds"] = r.wall_seconds;
  res["final_loss"] = {{"phi_eq", r.final_loss.eq},
                       {"phi_ic", r.final_loss.ic},
                       {"phi_bc", r.final_loss.bc},
                       {"phi_total", r.final_loss.total}};
  res["metrics"] = {{"rel_l2", r.metrics.rel_l2},
                    {"max_abs", r.metrics.max_abs},
                    {"n_points", r.metrics.n_points}};
  json slices = json::array();
  for (const auto& s : r.slices) {
    slices.push_back({{"t", s.t}, {"rel_l2", s.rel_l2}, {"max_abs", s.max_abs}});
  }
  res["time_slices"] = slices;
  j["result"] = res;
  return j;
}

/// Execute one configured run. When `write_files` is set, the output directory
/// receives config.json, loss_trace.csv, checkpoint.txt, evaluation.csv,
/// collocation.csv and summary.json.
inline RunResult execute_run(const RunConfig& cfg, bool write_files = true) {
  RunResult result;
  result.config = cfg;
  const auto errs = cfg.validation_errors();
  if (!errs.empty()) {
    std::ostringstream msg;
    msg << "invalid config:";
    for (const auto& e : errs) msg << "\n  - " << e;
    result.error = msg.str();
    return result;
  }

  std::filesystem::path dir;
  std::ofstream trace;
  if (write_files) {
    dir = resolve_output_dir(cfg.output_dir.empty() ? std::string("runs/run") : cfg.output_dir);
    std::filesystem::create_directories(dir);
    std::ofstream cfg_out(dir / "config.json");
    cfg_out << to_json(cfg).dump(2) << "\n";
  }

  try {
    const Problem prob = cfg.make_problem();
    Network net = Network::init(cfg.network_config());
    const CollocationSet colloc = build_grid(prob, cfg.collocation_config());
    if (write_files) {
      std::ofstream colloc_out(dir / "collocation.csv");
      write_collocation_csv(colloc, colloc_out);
      trace.open(dir / "loss_trace.csv");
    }
    TrainIO io;
    if (write_files) {
      io.trace_csv = &trace;
      io.checkpoint_dir = dir.string();
      io.checkpoint_every = cfg.checkpoint_every;
    }
    io.eval_grid = cfg.eval_grid;
    const TrainReport report = train(net, prob, colloc, cfg.train_config(), io);
    result.iterations = report.iterations;
    result.wall_seconds = report.wall_seconds;
    result.metrics = report.final_metrics;
    if (report.diverged) {
      result.error = report.diagnostic;
      return result;
    }
    const CaputoScheme scheme =
        CaputoScheme::build(cfg.scheme_kind(), prob.alpha, colloc.time_grid);
    result.final_loss = loss(net, prob, colloc, scheme);
    const std::vector<int> eval_grid =
        cfg.eval_grid.empty() ? default_eval_grid(prob) : cfg.eval_grid;
    const EvalTable table = evaluate(net, prob, eval_grid);
    for (double ts : report_timestamps(prob.name)) {
      for (const auto& [t, m] : table.time_slices) {
        if (std::abs(t - ts) < 1e-9) {
          result.slices.push_back({ts, m.rel_l2, m.max_abs});
          break;
        }
      }
    }
    result.network = net;
    result.ok = true;
    if (write_files) {
      std::ofstream ck(dir / "checkpoint.txt");
      net.save(ck);
      std::ofstream ev(dir / "evaluation.csv");
      write_eval_csv(table, ev);
      std::ofstream sum(dir / "summary.json");
      sum << summary_json(result).dump(2) << "\n";
    }
  } catch (const std::exception& e) {
    result.error = e.what();
    result.ok = false;
  }
  return result;
}

// ---- sweeps ------------------------------------------------------------------

/// One experiment axis swept over a list of values; each value yields a child
/// run differing from the base config only on that axis.
struct SweepSpec {
  RunConfig base;
  std::string axis;  // colloc_all_dims | colloc_time_only | colloc_space_only |
                     // time_window | wall_budget | architecture | scheme
  std::vector<json> values;
  int jobs = 1;
};

inline const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes{
      "colloc_all_dims", "colloc_time_only", "colloc_space_only", "time_window",
      "wall_budget",     "architecture",     "scheme"};
  return axes;
}

inline std::string sweep_value_slug(const json& v) {
  std::string s;
  if (v.is_array()) {
    for (const auto& e : v) {
      if (!s.empty()) s += "x";
      s += e.dump();
    }
  } else if (v.is_string()) {
    s = v.get<std::string>();
  } else {
    s = v.dump();
  }
  for (auto& ch : s) {
    if (ch == '.') ch = 'p';
    if (ch == '"') ch = '_';
  }
  return s;
}

/// Child config for one swept value; throws on malformed values.
inline RunConfig sweep_child(const SweepSpec& spec, const json& value) {
  RunConfig c = spec.base;
  if (spec.axis == "colloc_all_dims") {
    const int n = value.get<int>();
    for (auto& v : c.points_per_axis) v = n;
  } else if (spec.axis == "colloc_time_only") {
    c.points_per_axis.back() = value.get<int>();
  } else if (spec.axis == "colloc_space_only") {
    const int n = value.get<int>();
    for (std::size_t i = 0; i + 1 < c.points_per_axis.size(); ++i) c.points_per_axis[i] = n;
  } else if (spec.axis == "time_window") {
    c.time_window = value.get<double>();
  } else if (spec.axis == "wall_budget") {
    c.max_wall_seconds = value.get<double>();
  } else if (spec.axis == "architecture") {
    if (!value.is_array() || value.size() != 2) {
      throw std::invalid_argument("architecture sweep values must be [hidden_layers, neurons]");
    }
    c.hidden_layers = value.at(0).get<int>();
    c.neurons_per_layer = value.at(1).get<int>();
  } else if (spec.axis == "scheme") {
    c.scheme = value.get<std::string>();
    scheme_from_string(c.scheme);
  } else {
    throw std::invalid_argument("unknown sweep axis '" + spec.axis + "'");
  }
  c.output_dir = (std::filesystem::path(spec.base.output_dir.empty() ? std::string("runs/sweep")
                                                                     : spec.base.output_dir) /
                  (spec.axis + "_" + sweep_value_slug(value)))
                     .string();
  return c;
}

inline SweepSpec sweep_from_json(const json& j, std::vector<std::string>& errs) {
  SweepSpec spec;
  if (!j.is_object()) {
    errs.push_back("sweep spec must be a JSON object");
    return spec;
  }
  detail::reject_unknown_keys(j, {"base", "preset", "axis", "values", "jobs"}, "", errs);
  RunConfig base;
  if (j.contains("preset")) {
    try {
      base = preset(j.at("preset").get<std::string>());
    } catch (const std::exception& e) {
      errs.emplace_back(e.what());
    }
  }
  if (j.contains("base")) {
    base = run_config_from_json(j.at("base"), base, errs);
  }
  spec.base = base;
  detail::read_field(j, "axis", spec.axis, "", errs);
  bool axis_known = false;
  for (const auto& a : sweep_axes()) axis_known |= (a == spec.axis);
  if (!axis_known) errs.push_back("unknown sweep axis '" + spec.axis + "'");
  if (j.contains("values") && j.at("values").is_array() && !j.at("values").empty()) {
    for (const auto& v : j.at("values")) spec.values.push_back(v);
  } else {
    errs.push_back("sweep spec needs a non-empty 'values' array");
  }
  detail::read_field(j, "jobs", spec.jobs, "", errs);
  if (spec.jobs < 1) errs.push_back("jobs must be >= 1");
  return spec;
}

struct SweepOutcome {
  std::vector<RunResult> children;
  bool all_ok = true;
};

/// Run every child (up to `jobs` in parallel; each run stays single-threaded
/// and owns its output directory). A child failure is recorded and the sweep
/// continues.
inline SweepOutcome execute_sweep(const SweepSpec& spec, bool write_files = true) {
  SweepOutcome outcome;
  std::vector<RunConfig> configs;
  for (const auto& v : spec.values) configs.push_back(sweep_child(spec, v));
  outcome.children.resize(configs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= configs.size()) return;
      outcome.children[i] = execute_run(configs[i], write_files);
    }
  };
  const int jobs = std::max(1, std::min<int>(spec.jobs, static_cast<int>(configs.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& c : outcome.children) outcome.all_ok &= c.ok;
  return outcome;
}

/// One summary CSV row per child: swept value, status, budget use, final
/// losses, overall metrics, and the per-timestamp slice errors.
inline void write_sweep_summary(const SweepSpec& spec, const SweepOutcome& outcome,
                                std::ostream& out) {
  const auto stamps = report_timestamps(spec.base.problem_name());
  out << "value,status,iterations,wall_seconds,phi_eq,phi_ic,phi_bc,phi_total,rel_l2,max_abs";
  for (double t : stamps) {
    std::ostringstream name;
    name << "rel_l2_t" << t;
    out << ',' << name.str();
  }
  out << '\n';
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t i = 0; i < outcome.children.size(); ++i) {
    const RunResult& r = outcome.children[i];
    out << sweep_value_slug(spec.values[i]) << ',' << (r.ok ? "ok" : "failed") << ','
        << r.iterations << ',';
    std::snprintf(buf, sizeof buf, "%.3f", r.wall_seconds);
    out << buf << ',';
    put(r.final_loss.eq);
    out << ',';
    put(r.final_loss.ic);
    out << ',';
    put(r.final_loss.bc);
    out << ',';
    put(r.final_loss.total);
    out << ',';
    put(r.metrics.rel_l2);
    out << ',';
    put(r.metrics.max_abs);
    for (double t : stamps) {
      double v = 0.0;
      for (const auto& s : r.slices) {
        if (std::abs(s.t - t) < 1e-9) v = s.rel_l2;
      }
      out << ',';
      put(v);
    }
    out << '\n';
  }
}

}  // namespace fpinn
