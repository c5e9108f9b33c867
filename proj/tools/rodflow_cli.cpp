// rodflow: run experiments, validate configs, print closed-form values.

#include "rodflow/error.hpp"
#include "rodflow/harness/config.hpp"
#include "rodflow/harness/lockstep.hpp"
#include "rodflow/oracles.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

using nlohmann::ordered_json;
using namespace rodflow;

int run_oracle(const std::string& name, double eta, double s, double q, const std::vector<double>& b, double sigma0) {
  ordered_json out;
  out["oracle"] = name;
  if (name == "quadratic_modified_rate") {
    out["value"] = quadratic_modified_rate(eta, s);
  } else if (name == "quadratic_sigma_rate") {
    out["value"] = quadratic_sigma_rate(eta, s);
  } else if (name == "flat_steady_sigma") {
    if (b.empty()) throw Error(ErrorCode::InvalidArgument, "flat_steady_sigma needs --b");
    const Vec bv = Eigen::Map<const Vec>(b.data(), static_cast<Eigen::Index>(b.size()));
    const Mat m = flat_steady_sigma(eta, bv);
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      ordered_json r = ordered_json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
      rows.push_back(r);
    }
    out["value"] = rows;
  } else if (name == "quartic_fixed_points") {
    const FixedPointReport rep = quartic_fixed_points(eta, s, q);
    out["case"] = std::string(quartic_case_name(rep.case_id));
    ordered_json pts = ordered_json::array();
    for (const FixedPoint& fp : rep.points)
      pts.push_back({{"sigma", fp.sigma}, {"stability", std::string(stability_name(fp.stability))},
                     {"derivative", fp.derivative}});
    out["points"] = pts;
  } else if (name == "quartic_fate") {
    const QuarticPrediction p = predict_quartic_fate(eta, s, q, sigma0);
    out["fate"] = std::string(quartic_fate_name(p.fate));
    if (p.fate != QuarticFate::Diverges) out["limit"] = p.limit;
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown oracle '" + name + "'");
  }
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rod Flow, Central Flow and gradient descent at the edge of stability"};
  app.require_subcommand(1);

  std::string config_path, output_dir;
  auto* run = app.add_subcommand("run", "Run warm-up and lockstep flow comparison");
  run->add_option("config", config_path, "YAML config file")->required();
  run->add_option("--output-dir", output_dir, "Override output_dir from the config");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Parse and check a config without running it");
  validate->add_option("config", validate_path, "YAML config file")->required();

  std::string oracle_name;
  double eta = 0.0, s = 0.0, q = 0.0, sigma0 = 0.0;
  std::vector<double> b;
  auto* oracle = app.add_subcommand("oracle", "Print a closed-form value as JSON");
  oracle->add_option("name", oracle_name,
                     "quadratic_modified_rate | quadratic_sigma_rate | flat_steady_sigma | quartic_fixed_points | "
                     "quartic_fate")
      ->required();
  oracle->add_option("--eta", eta, "learning rate")->required();
  oracle->add_option("--S", s, "curvature");
  oracle->add_option("--Q", q, "quartic coefficient (L = S w^2/2 + Q w^4/4)");
  oracle->add_option("--b", b, "linear loss gradient")->delimiter(',');
  oracle->add_option("--sigma0", sigma0, "initial sigma for quartic_fate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      harness::ExperimentConfig config = harness::load_config(config_path);
      if (!output_dir.empty()) {
        config.output_dir = output_dir;
        config.echo["output_dir"] = output_dir;
      }
      const int code = harness::run_experiment(config);
      std::cout << "wrote " << (config.output_dir / "summary.json").string() << '\n';
      if (code != 0) std::cerr << "numerical abort: see summary.json termination reasons\n";
      return code == 0 ? kExitOk : kExitNumerical;
    }
    if (*validate) {
      const harness::ExperimentConfig config = harness::load_config(validate_path);
      config.validate();
      std::cout << config.echo.dump(2) << '\n';
      return kExitOk;
    }
    if (*oracle) return run_oracle(oracle_name, eta, s, q, b, sigma0);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    if (e.code() == ErrorCode::NonConvergence || e.code() == ErrorCode::NonFinite) return kExitNumerical;
    return kExitConfig;
  }
  return kExitOk;
}
