#pragma once

#include "rodflow/flows.hpp"
#include "rodflow/landscape.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rodflow::harness {

enum class FlowId { Gd, Gf, Rf, FoRf, Cf };
std::string_view flow_id_name(FlowId id);

struct ExperimentConfig {
  LossSpec loss = Sqrt2D{};
  Weights init;
  double eta = 0.0;
  double dt = 0.01;
  Integrator integrator = Integrator::Rk4;
  int warmup_steps = 2;
  int compare_steps = 1;
  std::vector<FlowId> flows;
  std::uint64_t seed = 0;
  int eig_cadence = 10;
  std::size_t k = 1;
  std::filesystem::path output_dir = "out";
  std::size_t rank = 3;
  std::size_t dense_threshold = 64;
  bool warmup_auto_stop = false;
  double spectral_tol = 1e-8;
  int spectral_max_iter = 10000;
  nlohmann::ordered_json echo;  // normalized copy of the parsed document

  void validate() const;
  FlowConfig flow_config() const;
  bool has(FlowId id) const;
};

// Throws ConfigError with the offending line/column.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Counter-based split: independent streams from one root seed.
std::uint64_t split_seed(std::uint64_t root, std::uint64_t stream);

enum class SeedStream : std::uint64_t { Data = 1, Init = 2, SpectralBase = 16 };

}  // namespace rodflow::harness
