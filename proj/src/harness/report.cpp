#include "rodflow/harness/report.hpp"

#include "rodflow/error.hpp"

#include <cmath>
#include <fstream>

namespace rodflow::harness {

namespace {

// JSON has no NaN; missing values become null.
nlohmann::ordered_json number(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

}  // namespace

nlohmann::ordered_json summary_json(const ExperimentConfig& config, const RunSummary& s) {
  nlohmann::ordered_json j;
  j["eta"] = config.eta;
  j["stability_threshold"] = 2.0 / config.eta;
  j["rows"] = s.rows;
  j["numerical_abort"] = s.numerical_abort;
  nlohmann::ordered_json w;
  w["steps_run"] = s.warmup.steps_run;
  w["diverged"] = s.warmup.diverged;
  w["auto_stopped"] = s.warmup.auto_stopped;
  w["detail"] = s.warmup.detail;
  j["warmup"] = w;
  nlohmann::ordered_json flows = nlohmann::ordered_json::object();
  for (const FlowSummary& f : s.flows) {
    nlohmann::ordered_json e;
    e["rows"] = f.rows;
    e["mean_center_discrepancy"] = number(f.mean_center_discrepancy);
    e["max_center_discrepancy"] = number(f.max_center_discrepancy);
    e["mean_delta_alignment"] = number(f.mean_delta_alignment);
    e["sharpness_band_fraction"] = number(f.sharpness_band_fraction);
    e["terminal_sharpness"] = number(f.terminal_sharpness);
    e["terminal_sigma_eigen_ratio"] = number(f.terminal_sigma_eigen_ratio);
    e["termination_reason"] = std::string(termination_name(f.termination));
    e["detail"] = f.detail;
    flows[std::string(flow_id_name(f.id))] = e;
  }
  j["flows"] = flows;
  j["config_echo"] = config.echo;
  return j;
}

void emit_report(const std::filesystem::path& dir, const ExperimentConfig& config, const RunSummary& summary) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "summary.json");
  require(out.good(), ErrorCode::InvalidArgument, "cannot write summary.json in " + dir.string());
  out << summary_json(config, summary).dump(2) << '\n';
}

}  // namespace rodflow::harness
