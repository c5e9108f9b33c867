#pragma once

#include "rodflow/autodiff.hpp"
#include "rodflow/dataset.hpp"
#include "rodflow/linalg.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace rodflow {

enum class MseReduction {
  Mean,           // over samples and outputs
  MeanOverSamples  // sum over outputs, mean over samples
};

// Fully connected net, activation on hidden layers only. Parameters are
// laid out layer by layer: W (fan_in x fan_out, row-major), then b.
struct MlpArchitecture {
  std::vector<std::size_t> layers;  // [input, hidden..., output]
  Activation activation = Activation::Silu;

  std::size_t parameter_count() const;
  void validate() const;
};

class TinyMlpModel {
 public:
  TinyMlpModel(MlpArchitecture arch, std::shared_ptr<const Dataset> data, MseReduction reduction = MseReduction::Mean);

  std::size_t dimension() const { return dimension_; }
  const MlpArchitecture& architecture() const { return arch_; }
  const Dataset& data() const { return *data_; }
  MseReduction reduction() const { return reduction_; }

  double loss(const Weights& w) const;
  Weights gradient(const Weights& w) const;
  // Forward-over-reverse.
  Weights hvp(const Weights& w, const Weights& v) const;

 private:
  template <class T>
  std::vector<T> run(Tape<T>& tape, const std::vector<T>& params, T* loss_out, bool want_grad) const;

  MlpArchitecture arch_;
  std::shared_ptr<const Dataset> data_;
  MseReduction reduction_;
  std::size_t dimension_;
};

// Weights ~ N(0, scale^2 / fan_in), biases zero.
Weights mlp_init_weights(const MlpArchitecture& arch, std::uint64_t seed, double scale = 1.0);

}  // namespace rodflow
