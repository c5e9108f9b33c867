#pragma once

#include "rodflow/linalg.hpp"

#include <cstdint>
#include <filesystem>

namespace rodflow {

struct Dataset {
  Mat inputs;   // n x d
  Mat targets;  // n x o

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(inputs.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(targets.cols()); }
  void validate() const;
};

// Random inputs labelled by a fixed random tanh network.
struct TeacherConfig {
  std::size_t samples = 32;
  std::size_t input_dim = 2;
  std::size_t output_dim = 1;
  std::size_t hidden = 8;
  double target_scale = 1.0;
  std::uint64_t seed = 0;
};

Dataset make_teacher_dataset(const TeacherConfig& config);

// Header row required; the last target_columns columns are targets.
Dataset load_csv_dataset(const std::filesystem::path& path, std::size_t target_columns);

}  // namespace rodflow
