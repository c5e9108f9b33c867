#pragma once

#include "rodflow/linalg.hpp"

namespace rodflow {

// Sigma = V diag(lambda) V^T with V orthonormal (p x m, m <= rank budget)
// and lambda descending, non-negative.
class LowRankSigma {
 public:
  LowRankSigma(std::size_t dim, std::size_t rank_budget);
  LowRankSigma(Mat basis, Vec eigenvalues, std::size_t rank_budget);

  // delta delta^T
  static LowRankSigma from_outer(const Vec& delta, std::size_t rank_budget);

  std::size_t dim() const { return static_cast<std::size_t>(basis_.rows()); }
  std::size_t active_rank() const { return static_cast<std::size_t>(basis_.cols()); }
  std::size_t rank_budget() const { return rank_budget_; }
  const Mat& basis() const { return basis_; }
  const Vec& eigenvalues() const { return eigenvalues_; }
  double trace() const { return eigenvalues_.sum(); }

 private:
  Mat basis_;
  Vec eigenvalues_;
  std::size_t rank_budget_;
};

// lambda <- (1 - 2 dt) lambda
LowRankSigma sigma_decay(const LowRankSigma& sigma, double dt);

// Adds (eta^2 / 4) dt (g+ g+^T + g- g-^T) and truncates back to the budget.
LowRankSigma sigma_rank_update(const LowRankSigma& sigma, const Vec& g_plus, const Vec& g_minus, double eta, double dt);

// Same, with an explicit injection coefficient c: adds c (g+ g+^T + g- g-^T).
LowRankSigma sigma_inject(const LowRankSigma& sigma, const Vec& g_plus, const Vec& g_minus, double coefficient);

// sqrt(lambda_1) v_1; sign aligned with reference when given.
Vec principal_delta(const LowRankSigma& sigma, const Vec* reference = nullptr);

// Dense reconstruction, for tests and small p only.
Mat sigma_dense(const LowRankSigma& sigma, std::size_t max_dim = 64);

// lambda_1 / max(lambda_2, floor)
double eigen_ratio(const LowRankSigma& sigma, double floor = 1e-300);

}  // namespace rodflow
