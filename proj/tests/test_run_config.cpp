#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fpinn/run_config.hpp"

using namespace fpinn;
using nlohmann::json;

namespace {

RunConfig tiny_fode_config() {
  RunConfig c = preset("fode");
  c.points_per_axis = {8};
  c.ic_points = 4;
  c.max_iters = 40;
  c.hidden_layers = 2;
  c.neurons_per_layer = 4;
  c.eval_grid = {21};
  return c;
}

}  // namespace

TEST_CASE("config JSON round trip is lossless") {
  RunConfig c = preset("fpde3d");
  c.seed = 987;
  c.loss_tolerance = 1e-4;
  c.time_window = 0.25;
  c.output_dir = "runs/x";
  c.checkpoint_every = 500;
  const json j = to_json(c);
  std::vector<std::string> errs;
  const RunConfig back = run_config_from_json(j, RunConfig{}, errs);
  CHECK(errs.empty());
  CHECK(to_json(back) == j);
}

TEST_CASE("unknown keys are rejected with exhaustive messages") {
  json j = to_json(preset("fode"));
  j["typo_key"] = 1;
  j["network"]["neurons"] = 10;  // wrong name
  j["train"]["max_iter"] = 100;  // wrong name
  std::vector<std::string> errs;
  run_config_from_json(j, RunConfig{}, errs);
  REQUIRE(errs.size() == 3);
  CHECK(errs[0].find("typo_key") != std::string::npos);
  CHECK(errs[1].find("network.neurons") != std::string::npos);
  CHECK(errs[2].find("train.max_iter") != std::string::npos);
}

TEST_CASE("wrong value types are reported, not crashed on") {
  json j;
  j["alpha"] = "half";
  j["network"] = {{"hidden_layers", "three"}};
  std::vector<std::string> errs;
  run_config_from_json(j, RunConfig{}, errs);
  CHECK(errs.size() == 2);
}

TEST_CASE("presets encode the benchmark hyperparameter table") {
  const RunConfig f = preset("fode");
  CHECK(f.alpha == 0.5);
  CHECK(f.hidden_layers == 3);
  CHECK(f.neurons_per_layer == 10);
  CHECK(f.points_per_axis == std::vector<int>{30});
  CHECK(f.ic_points == 30);
  CHECK(f.bc_points == 0);
  CHECK(f.learning_rates == std::vector<double>{0.01, 0.001, 0.0005});
  CHECK(f.lr_change_iters == std::vector<long>{200, 1000});

  const RunConfig p2 = preset("fpde2d");
  CHECK(p2.hidden_layers == 4);
  CHECK(p2.neurons_per_layer == 20);
  CHECK(p2.points_per_axis == std::vector<int>{10, 10});
  CHECK(p2.ic_points == 100);
  CHECK(p2.bc_points == 100);
  CHECK(p2.learning_rates == std::vector<double>{0.01, 0.005, 0.001});
  CHECK(p2.lr_change_iters == std::vector<long>{2000, 5000});

  const RunConfig p3 = preset("fpde3d");
  CHECK(p3.points_per_axis == std::vector<int>{5, 5, 5});
  CHECK(p3.ic_points == 5);
  CHECK(p3.bc_points == 25);
  CHECK(p3.make_problem().domain.t_end == 0.5);

  CHECK_THROWS_AS(preset("nope"), std::invalid_argument);
}

TEST_CASE("validation collects every problem at once") {
  RunConfig c = preset("fode");
  c.alpha = 1.5;
  c.scheme = "mystery";
  c.points_per_axis = {30, 30};  // wrong arity for fODE
  c.max_iters = 0;
  c.max_wall_seconds = 0;
  const auto errs = c.validation_errors();
  CHECK(errs.size() >= 4);
}

TEST_CASE("sweep children differ from base only on the swept axis") {
  SweepSpec spec;
  spec.base = preset("fpde3d");
  spec.axis = "colloc_time_only";
  spec.values = {json(5), json(20), json(40)};
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    const RunConfig child = sweep_child(spec, spec.values[i]);
    json a = to_json(spec.base);
    json b = to_json(child);
    // revert the swept axis and the derived output dir; nothing else may differ
    b["collocation"]["points_per_axis"] = a["collocation"]["points_per_axis"];
    b["output_dir"] = a["output_dir"];
    CHECK(a == b);
    CHECK(sweep_child(spec, spec.values[i]).points_per_axis.back() ==
          spec.values[i].get<int>());
  }
  SECTION("architecture axis") {
    spec.axis = "architecture";
    const RunConfig child = sweep_child(spec, json::array({7, 40}));
    CHECK(child.hidden_layers == 7);
    CHECK(child.neurons_per_layer == 40);
  }
  SECTION("time window axis") {
    spec.axis = "time_window";
    CHECK(sweep_child(spec, json(0.25)).time_window == 0.25);
  }
  SECTION("scheme axis") {
    spec.axis = "scheme";
    CHECK(sweep_child(spec, json("l1")).scheme == "l1");
    CHECK_THROWS(sweep_child(spec, json("grunwald")));
  }
  SECTION("space-only axis leaves the time count alone") {
    spec.axis = "colloc_space_only";
    const RunConfig child = sweep_child(spec, json(12));
    CHECK(child.points_per_axis == std::vector<int>{12, 12, 5});
  }
}

TEST_CASE("sweep spec parsing with preset base and strict keys") {
  json j;
  j["preset"] = "fode";
  j["base"] = {{"train", {{"max_iters", 7}}}};
  j["axis"] = "scheme";
  j["values"] = json::array({"diethelm", "l1"});
  std::vector<std::string> errs;
  const SweepSpec spec = sweep_from_json(j, errs);
  CHECK(errs.empty());
  CHECK(spec.base.max_iters == 7);
  CHECK(spec.base.problem == "fode");
  CHECK(spec.values.size() == 2);

  SECTION("bad axis and missing values are reported") {
    json bad;
    bad["axis"] = "colloc_everything";
    std::vector<std::string> errs2;
    sweep_from_json(bad, errs2);
    CHECK(errs2.size() >= 2);
  }
}

TEST_CASE("execute_run produces a reconstructible summary") {
  const RunConfig cfg = tiny_fode_config();
  const RunResult result = execute_run(cfg, /*write_files=*/false);
  REQUIRE(result.ok);
  CHECK(result.iterations == 40);
  CHECK(result.final_loss.total == result.final_loss.eq + result.final_loss.ic + result.final_loss.bc);
  const json summary = summary_json(result);
  std::vector<std::string> errs;
  const RunConfig back = run_config_from_json(summary.at("config"), RunConfig{}, errs);
  CHECK(errs.empty());
  CHECK(to_json(back) == to_json(cfg));
}

TEST_CASE("execute_run reports invalid configs instead of running") {
  RunConfig cfg = tiny_fode_config();
  cfg.alpha = 2.0;
  const RunResult result = execute_run(cfg, false);
  CHECK_FALSE(result.ok);
  CHECK(result.error.find("alpha") != std::string::npos);
}

TEST_CASE("file outputs are byte-identical across reruns except timings") {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "fpinn_rcfg_test";
  fs::remove_all(root);
  RunConfig cfg = tiny_fode_config();

  auto run_into = [&](const std::string& sub) {
    RunConfig c = cfg;
    c.output_dir = (root / sub).string();
    const RunResult r = execute_run(c, true);
    REQUIRE(r.ok);
    return c.output_dir;
  };
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const auto d1 = run_into("a");
  const auto d2 = run_into("b");
  CHECK(slurp(fs::path(d1) / "checkpoint.txt") == slurp(fs::path(d2) / "checkpoint.txt"));
  CHECK(slurp(fs::path(d1) / "evaluation.csv") == slurp(fs::path(d2) / "evaluation.csv"));
  CHECK(slurp(fs::path(d1) / "collocation.csv") == slurp(fs::path(d2) / "collocation.csv"));
  // loss traces agree column-by-column once the elapsed-time column is dropped
  std::istringstream t1(slurp(fs::path(d1) / "loss_trace.csv"));
  std::istringstream t2(slurp(fs::path(d2) / "loss_trace.csv"));
  std::string l1, l2;
  while (std::getline(t1, l1)) {
    REQUIRE(std::getline(t2, l2));
    CHECK(l1.substr(0, l1.rfind(',')) == l2.substr(0, l2.rfind(',')));
  }
  CHECK_FALSE(std::getline(t2, l2));
  fs::remove_all(root);
}

TEST_CASE("sweep executor records child failures and carries on") {
  SweepSpec spec;
  spec.base = tiny_fode_config();
  spec.axis = "colloc_time_only";
  spec.values = {json(6), json(1), json(8)};  // middle child is invalid (needs >= 2)
  const SweepOutcome outcome = execute_sweep(spec, false);
  REQUIRE(outcome.children.size() == 3);
  CHECK(outcome.children[0].ok);
  CHECK_FALSE(outcome.children[1].ok);
  CHECK(outcome.children[2].ok);
  CHECK_FALSE(outcome.all_ok);

  std::ostringstream csv;
  write_sweep_summary(spec, outcome, csv);
  const std::string text = csv.str();
  CHECK(text.find("\n6,ok,") != std::string::npos);
  CHECK(text.find("\n1,failed,") != std::string::npos);
}

TEST_CASE("parallel sweep matches serial results") {
  SweepSpec spec;
  spec.base = tiny_fode_config();
  spec.axis = "colloc_time_only";
  spec.values = {json(5), json(6), json(7), json(8)};
  spec.jobs = 1;
  const auto serial = execute_sweep(spec, false);
  spec.jobs = 2;
  const auto parallel = execute_sweep(spec, false);
  REQUIRE(serial.children.size() == parallel.children.size());
  for (std::size_t i = 0; i < serial.children.size(); ++i) {
    CHECK(serial.children[i].final_loss.total == parallel.children[i].final_loss.total);
    CHECK(serial.children[i].metrics.rel_l2 == parallel.children[i].metrics.rel_l2);
  }
}

TEST_CASE("output root env var reroutes relative directories") {
  ::setenv("FPINN_OUTPUT_ROOT", "/tmp/fpinn_root_test", 1);
  CHECK(resolve_output_dir("runs/x") == std::filesystem::path("/tmp/fpinn_root_test/runs/x"));
  CHECK(resolve_output_dir("/abs/path") == std::filesystem::path("/abs/path"));
  ::unsetenv("FPINN_OUTPUT_ROOT");
  CHECK(resolve_output_dir("runs/x") == std::filesystem::path("runs/x"));
}
