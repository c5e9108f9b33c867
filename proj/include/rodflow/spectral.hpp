#pragma once

#include "rodflow/landscape.hpp"

#include <cstdint>
#include <optional>

namespace rodflow {

struct SpectralOptions {
  double tol = 1e-8;
  int max_iter = 10000;
  std::uint64_t seed = 0;
};

struct EigResult {
  Vec values;     // descending
  Mat vectors;    // p x k, orthonormal
  Vec residuals;  // ||H v - lambda v|| per pair
  int iterations = 0;
  bool converged = false;  // false: best effort after max_iter
};

struct SharpnessResult {
  double value = 0.0;
  Vec vector;
  double residual = 0.0;
  int iterations = 0;
};

// Largest algebraic Hessian eigenvalue by power iteration. Certified when
// ||H v - lambda v|| <= tol * max(1, |lambda|).
SharpnessResult sharpness_pair(const LossSpec& spec, const Weights& w, const SpectralOptions& options = {},
                               const Vec* warm = nullptr);
double sharpness(const LossSpec& spec, const Weights& w, double tol = 1e-8, int max_iter = 10000);

// Top-k eigenpairs by block subspace iteration with Rayleigh-Ritz.
EigResult top_k_eigs(const LossSpec& spec, const Weights& w, std::size_t k, const SpectralOptions& options = {},
                     const EigResult* warm = nullptr);

}  // namespace rodflow
