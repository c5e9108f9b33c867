#include "doctest.h"

#include <rodflow/error.hpp>
#include <rodflow/harness/config.hpp>
#include <rodflow/harness/csv.hpp>
#include <rodflow/harness/lockstep.hpp>
#include <rodflow/harness/report.hpp>

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

using namespace rodflow;
using namespace rodflow::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rodflow_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSqrt = R"(
loss: {type: sqrt2d}
init: [4.0, 0.1]
eta: 0.4
dt: 0.01
warmup_steps: 20
compare_steps: 100
flows: [gd, gf, rf]
eig_cadence: 1
)";

ConfigError parse_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("expected a config error");
  return ConfigError("unreachable");
}

double column_mean(const CsvTable& t, const std::string& name) {
  const std::size_t c = t.column(name);
  double s = 0.0;
  for (const auto& r : t.rows) s += r[c];
  return s / static_cast<double>(t.rows.size());
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(kSqrt);
  CHECK(c.eta == 0.4);
  CHECK(c.warmup_steps == 20);
  CHECK(c.flows == std::vector<FlowId>{FlowId::Gd, FlowId::Gf, FlowId::Rf});
  CHECK(c.init == Weights{{4.0, 0.1}});
  CHECK(c.k == 1);
  CHECK(c.integrator == Integrator::Rk4);
  CHECK(c.echo["loss"]["type"] == "sqrt2d");
  CHECK(c.echo["flows"].size() == 3);

  const ExperimentConfig m = parse_config(R"(
loss: {type: mlp, layers: [2, 4, 1], data: {kind: teacher, samples: 8, scale: 2.0}}
init: {scale: 0.5}
eta: 0.1
warmup_steps: 10
compare_steps: 5
flows: [cf]
seed: 7
)");
  CHECK(m.init.size() == 17);
  CHECK(parse_config(R"(
loss: {type: mlp, layers: [2, 4, 1], data: {kind: teacher, samples: 8, scale: 2.0}}
init: {scale: 0.5}
eta: 0.1
warmup_steps: 10
compare_steps: 5
flows: [cf]
seed: 7
)").init == m.init);
}

TEST_CASE("config errors carry positions") {
  ConfigError e = parse_error("loss: {type: sqrt2d}\ninit: [1, 1]\neta: 0.4\nwarmup_steps: 5\ncompare_steps: 5\nflows: [gd]\nbogus: 1\n");
  CHECK(e.line() == 7);
  CHECK(e.column() == 1);
  CHECK(std::string(e.what()).find("bogus") != std::string::npos);

  e = parse_error("loss: {type: sqrt2d}\ninit: [1, 1]\neta: fast\nwarmup_steps: 5\ncompare_steps: 5\nflows: [gd]\n");
  CHECK(e.line() == 3);
  CHECK(e.column() == 6);

  e = parse_error("loss: {type: sqrt2d}\ninit: [1, 1]\neta: 0.4\nwarmup_steps: 5\ncompare_steps: 5\nflows: []\n");
  CHECK(e.line() == 6);
  e = parse_error("loss: {type: sqrt2d}\ninit: [1, 1]\neta: 0.4\nwarmup_steps: 1\ncompare_steps: 5\nflows: [gd]\n");
  CHECK(e.line() == 4);
  e = parse_error("loss: {type: sqrt2d}\ninit: [1, 1]\neta: 0.4\nwarmup_steps: 5\ncompare_steps: 0\nflows: [gd]\n");
  CHECK(e.line() == 5);
  e = parse_error("loss: {type: sqrt2d}\ninit: [1, 1, 1]\neta: 0.4\nwarmup_steps: 5\ncompare_steps: 5\nflows: [gd]\n");
  CHECK(e.line() == 2);
  e = parse_error("loss: {type: sqrt2d}\ninit: [1, 1]\neta: 0.4\nwarmup_steps: 5\ncompare_steps: 5\nflows: [gd, xf]\n");
  CHECK(e.line() == 6);
  e = parse_error("loss: {type: sqrt2d\ninit: [1, 1]\n");
  CHECK(e.line() > 0);
  CHECK(e.code() == ErrorCode::ConfigError);

  ExperimentConfig c = parse_config(kSqrt);
  c.flows.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("seed splitting") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t root : {0, 1, 42})
    for (std::uint64_t s = 0; s < 32; ++s) seen.insert(split_seed(root, s));
  CHECK(seen.size() == 96);
  CHECK(split_seed(5, 3) == split_seed(5, 3));
}

TEST_CASE("warm-up") {
  ExperimentConfig q = parse_config(
      "loss: {type: quadratic1d, S: 5.0}\ninit: [1.0]\neta: 0.2\nwarmup_steps: 400\ncompare_steps: 1\nflows: [gd]\n");
  const WarmupResult rq = run_warmup(q);
  CHECK_FALSE(rq.diverged);
  CHECK(rq.seed.delta.norm() < 1e-12);
  CHECK(std::abs(rq.seed.wbar(0)) < 1e-12);

  // from (2, 1) descent settles on the valley floor below the threshold
  ExperimentConfig s = parse_config(kSqrt);
  s.init = Weights{{2.0, 1.0}};
  s.warmup_steps = 300;
  const WarmupResult rs = run_warmup(s);
  CHECK_FALSE(rs.diverged);
  CHECK(rs.steps_run == 300);
  CHECK(rs.seed.delta.norm() < 1e-6);

  s.init = Weights{{4.0, 0.1}};
  s.warmup_steps = 20;
  CHECK(run_warmup(s).seed.delta.norm() > 0.01);

  s.warmup_steps = 2;
  const WarmupResult two = run_warmup(s);
  const Weights w1 = gd_step(Sqrt2D{}, s.init, s.eta);
  const Weights w2 = gd_step(Sqrt2D{}, w1, s.eta);
  const RodCoordinates rc = to_rod(w1, w2);
  CHECK(two.seed.wbar == rc.wbar);
  CHECK(two.seed.delta == rc.delta);

  ExperimentConfig d = parse_config(
      "loss: {type: quadratic1d, S: 30.0}\ninit: [1.0]\neta: 0.2\nwarmup_steps: 400\ncompare_steps: 1\nflows: [gd]\n");
  const WarmupResult rd = run_warmup(d);
  CHECK(rd.diverged);
  CHECK(std::isfinite(rd.w_last(0)));
  CHECK(rd.steps_run < 400);
}

TEST_CASE("gradient descent compared with itself") {
  ExperimentConfig c = parse_config(kSqrt);
  c.flows = {FlowId::Gd};
  c.output_dir = scratch("gd_only");
  const RunSummary s = run_lockstep(c, run_warmup(c));
  REQUIRE(s.flows.size() == 1);
  CHECK(s.flows[0].max_center_discrepancy == 0.0);
  const CsvTable t = read_csv(c.output_dir / "metrics.csv");
  CHECK(t.rows.size() == 101);
  const std::size_t col = t.column("gd_center_discrepancy");
  for (const auto& r : t.rows) CHECK(r[col] == 0.0);
  CHECK(fs::exists(c.output_dir / "trajectory_gd.csv"));
}

TEST_CASE("rod flow tracks gradient descent better than gradient flow on the square-root loss") {
  ExperimentConfig c = parse_config(kSqrt);
  c.output_dir = scratch("sqrt");
  RunSummary s;
  CHECK(run_experiment(c, &s) == 0);
  const FlowSummary& gf = s.flows[1];
  const FlowSummary& rf = s.flows[2];
  CHECK(gf.id == FlowId::Gf);
  CHECK(rf.id == FlowId::Rf);
  CHECK(rf.mean_center_discrepancy < gf.mean_center_discrepancy);

  // summary means recomputed from the CSV
  const CsvTable t = read_csv(c.output_dir / "metrics.csv");
  CHECK(t.rows.size() == static_cast<std::size_t>(c.compare_steps + 1));
  CHECK(column_mean(t, "gf_center_discrepancy") == doctest::Approx(gf.mean_center_discrepancy).epsilon(1e-12));
  CHECK(column_mean(t, "rf_center_discrepancy") == doctest::Approx(rf.mean_center_discrepancy).epsilon(1e-12));
  CHECK(column_mean(t, "rf_delta_alignment") == doctest::Approx(rf.mean_delta_alignment).epsilon(1e-12));

  const nlohmann::json j = nlohmann::json::parse(read_file(c.output_dir / "summary.json"));
  CHECK(j["flows"]["rf"]["termination_reason"] == "completed");
  CHECK(j["flows"]["rf"]["mean_center_discrepancy"].get<double>() == rf.mean_center_discrepancy);
  CHECK(j["config_echo"]["eta"] == 0.4);

  const CsvTable traj = read_csv(c.output_dir / "trajectory_rf.csv");
  CHECK(traj.header == std::vector<std::string>{"time", "loss_center", "loss_edge_plus", "loss_edge_minus",
                                                "sharpness_center", "delta_norm"});
}

TEST_CASE("gradient descent columns do not depend on the other flows") {
  ExperimentConfig a = parse_config(kSqrt);
  a.flows = {FlowId::Gd};
  a.output_dir = scratch("cols_a");
  run_experiment(a);
  ExperimentConfig b = parse_config(kSqrt);
  b.flows = {FlowId::Gd, FlowId::Rf, FlowId::Cf};
  b.output_dir = scratch("cols_b");
  run_experiment(b);
  CHECK(read_file(a.output_dir / "trajectory_gd.csv") == read_file(b.output_dir / "trajectory_gd.csv"));
}

TEST_CASE("repeated runs are byte-identical") {
  ExperimentConfig c = parse_config(R"(
loss: {type: mlp, layers: [2, 3, 1], data: {kind: teacher, samples: 8, scale: 3.0}}
eta: 0.2
dt: 0.1
warmup_steps: 50
compare_steps: 20
flows: [gd, gf, rf, fo_rf, cf]
seed: 3
eig_cadence: 5
)");
  const fs::path first = scratch("det_a");
  c.output_dir = first;
  run_experiment(c);
  c.output_dir = scratch("det_b");
  run_experiment(c);
  for (const char* f : {"metrics.csv", "trajectory_gd.csv", "trajectory_gf.csv", "trajectory_rf.csv",
                        "trajectory_fo_rf.csv", "trajectory_cf.csv"}) {
    CAPTURE(f);
    const std::string x = read_file(first / f);
    CHECK(!x.empty());
    CHECK(x == read_file(c.output_dir / f));
  }
}

TEST_CASE("an aborted flow is reported and the rest continue") {
  ExperimentConfig c = parse_config(
      "loss: {type: quadratic1d, S: 15.0}\ninit: [1.0]\neta: 0.2\ndt: 0.05\nwarmup_steps: 2\ncompare_steps: 60\n"
      "flows: [gf, rf]\n");
  c.output_dir = scratch("abort");
  RunSummary s;
  CHECK(run_experiment(c, &s) == 3);
  CHECK(s.flows[0].termination == Termination::Completed);
  CHECK(s.flows[1].termination == Termination::Diverged);
  CHECK(s.flows[1].rows < s.rows);
  const nlohmann::json j = nlohmann::json::parse(read_file(c.output_dir / "summary.json"));
  CHECK(j["numerical_abort"] == true);
  CHECK(j["flows"]["rf"]["termination_reason"] == "diverged");
  CHECK(j["flows"]["gf"]["termination_reason"] == "completed");
  const CsvTable t = read_csv(c.output_dir / "metrics.csv");
  CHECK(t.rows.size() == 61);
  CHECK(std::isnan(t.rows.back()[t.column("rf_loss_center")]));
}

TEST_CASE("csv round trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(NAN) == "nan");
  CHECK(format_double(-INFINITY) == "-inf");
  const double awkward = 1.0 / 3.0;
  CHECK(std::stod(format_double(awkward)) == awkward);
}
