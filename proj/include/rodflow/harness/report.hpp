#pragma once

#include "rodflow/harness/config.hpp"
#include "rodflow/harness/lockstep.hpp"

#include "json.hpp"

#include <filesystem>

namespace rodflow::harness {

nlohmann::ordered_json summary_json(const ExperimentConfig& config, const RunSummary& summary);

// Writes summary.json into dir.
void emit_report(const std::filesystem::path& dir, const ExperimentConfig& config, const RunSummary& summary);

}  // namespace rodflow::harness
