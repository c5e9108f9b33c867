#pragma once

#include "rodflow/harness/config.hpp"

#include <string>
#include <vector>

namespace rodflow::harness {

struct WarmupResult {
  Weights w_prev;  // last iterate pair (w_prev, w_last)
  Weights w_last;
  RodCoordinates seed;
  int steps_run = 0;
  bool diverged = false;
  bool auto_stopped = false;
  std::string detail;
};

WarmupResult run_warmup(const ExperimentConfig& config);

struct FlowSummary {
  FlowId id = FlowId::Gd;
  std::size_t rows = 0;
  double mean_center_discrepancy = 0.0;
  double max_center_discrepancy = 0.0;
  double mean_delta_alignment = 0.0;
  double sharpness_band_fraction = 0.0;  // rows with sharpness in [0.9, 1.1] * 2/eta
  double terminal_sharpness = 0.0;
  double terminal_sigma_eigen_ratio = 0.0;  // NaN when the flow has no sigma
  Termination termination = Termination::Completed;
  std::string detail;
};

struct RunSummary {
  WarmupResult warmup;
  std::vector<FlowSummary> flows;
  std::size_t rows = 0;
  bool numerical_abort = false;
};

// Advances GD and every enabled flow in lockstep from the warm-up seed and
// writes trajectory_<flow>.csv and metrics.csv into the output directory.
// Only current states are held; nothing is accumulated per step except
// running sums for the summary.
RunSummary run_lockstep(const ExperimentConfig& config, const WarmupResult& warmup);

// Warm-up, lockstep, summary.json. Returns 0, or 3 on a numerical abort.
int run_experiment(const ExperimentConfig& config, RunSummary* summary_out = nullptr);

}  // namespace rodflow::harness
