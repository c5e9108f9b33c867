#include "rodflow/lowrank.hpp"

#include "rodflow/error.hpp"

#include <algorithm>
#include <cmath>

namespace rodflow {

LowRankSigma::LowRankSigma(std::size_t dim, std::size_t rank_budget)
    : basis_(static_cast<Eigen::Index>(dim), 0), eigenvalues_(0), rank_budget_(rank_budget) {
  require(dim > 0, ErrorCode::InvalidArgument, "low-rank sigma: dimension must be positive");
  require(rank_budget >= 1, ErrorCode::InvalidArgument, "low-rank sigma: rank budget must be >= 1");
}

LowRankSigma::LowRankSigma(Mat basis, Vec eigenvalues, std::size_t rank_budget)
    : basis_(std::move(basis)), eigenvalues_(std::move(eigenvalues)), rank_budget_(rank_budget) {
  require(rank_budget >= 1, ErrorCode::InvalidArgument, "low-rank sigma: rank budget must be >= 1");
  require_same_dim(static_cast<std::size_t>(basis_.cols()), static_cast<std::size_t>(eigenvalues_.size()),
                   "low-rank sigma eigenvalue count");
  require(static_cast<std::size_t>(basis_.cols()) <= rank_budget, ErrorCode::InvalidArgument,
          "low-rank sigma: more columns than rank budget");
  require(all_finite(basis_) && all_finite(eigenvalues_), ErrorCode::NonFinite, "low-rank sigma: non-finite entry");
  for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i) {
    require(eigenvalues_(i) >= 0.0, ErrorCode::InvalidArgument, "low-rank sigma: negative eigenvalue");
    if (i > 0) require(eigenvalues_(i) <= eigenvalues_(i - 1), ErrorCode::InvalidArgument,
                       "low-rank sigma: eigenvalues not descending");
  }
  if (basis_.cols() > 0) {
    const double err =
        (basis_.transpose() * basis_ - Mat::Identity(basis_.cols(), basis_.cols())).cwiseAbs().maxCoeff();
    require(err <= 1e-10, ErrorCode::InvalidArgument, "low-rank sigma: basis not orthonormal");
  }
}

LowRankSigma LowRankSigma::from_outer(const Vec& delta, std::size_t rank_budget) {
  LowRankSigma empty(static_cast<std::size_t>(delta.size()), rank_budget);
  return sigma_inject(empty, delta, Vec::Zero(delta.size()), 1.0);
}

LowRankSigma sigma_decay(const LowRankSigma& sigma, double dt) {
  require(dt > 0.0 && dt <= 0.25, ErrorCode::InvalidArgument, "sigma_decay: dt must lie in (0, 0.25]");
  return LowRankSigma(sigma.basis(), (1.0 - 2.0 * dt) * sigma.eigenvalues(), sigma.rank_budget());
}

LowRankSigma sigma_rank_update(const LowRankSigma& sigma, const Vec& g_plus, const Vec& g_minus, double eta,
                               double dt) {
  require(eta > 0.0 && dt > 0.0, ErrorCode::InvalidArgument, "sigma_rank_update: eta and dt must be positive");
  return sigma_inject(sigma, g_plus, g_minus, 0.25 * eta * eta * dt);
}

LowRankSigma sigma_inject(const LowRankSigma& sigma, const Vec& g_plus, const Vec& g_minus, double coefficient) {
  require_same_dim(sigma.dim(), static_cast<std::size_t>(g_plus.size()), "sigma update g+");
  require_same_dim(sigma.dim(), static_cast<std::size_t>(g_minus.size()), "sigma update g-");
  require(all_finite(g_plus) && all_finite(g_minus), ErrorCode::NonFinite, "sigma update: non-finite gradient");
  require(coefficient >= 0.0, ErrorCode::InvalidArgument, "sigma update: negative injection");

  const Mat& v = sigma.basis();
  const Eigen::Index m = v.cols();
  const double eps = 1e-10 * std::max({g_plus.norm(), g_minus.norm(), 1.0});

  // Directions of g+ and g- that the current basis misses.
  Mat augmented(v.rows(), m + 2);
  augmented.leftCols(m) = v;
  Eigen::Index cols = m;
  for (const Vec* g : {&g_plus, &g_minus}) {
    Vec r = *g;
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index j = 0; j < cols; ++j) r -= augmented.col(j).dot(r) * augmented.col(j);
    const double nr = r.norm();
    if (nr > eps) augmented.col(cols++) = r / nr;
  }
  augmented.conservativeResize(Eigen::NoChange, cols);

  const Vec cp = augmented.transpose() * g_plus;
  const Vec cm = augmented.transpose() * g_minus;
  Mat core = Mat::Zero(cols, cols);
  for (Eigen::Index i = 0; i < m; ++i) core(i, i) = sigma.eigenvalues()(i);
  core += coefficient * (cp * cp.transpose() + cm * cm.transpose());

  const SymmetricEigen e = jacobi_eigen(core);
  const Eigen::Index keep = std::min<Eigen::Index>(cols, static_cast<Eigen::Index>(sigma.rank_budget()));
  Mat rotated = augmented * e.vectors.leftCols(keep);
  Mat basis = orthonormalize_columns(rotated, 0.0);
  Vec values = e.values.head(keep).cwiseMax(0.0);
  if (basis.cols() < keep) {
    // Degenerate rotation; drop the lost columns with their eigenvalues.
    values.conservativeResize(basis.cols());
  }
  return LowRankSigma(std::move(basis), std::move(values), sigma.rank_budget());
}

Vec principal_delta(const LowRankSigma& sigma, const Vec* reference) {
  if (sigma.active_rank() == 0) return Vec::Zero(static_cast<Eigen::Index>(sigma.dim()));
  Vec d = std::sqrt(sigma.eigenvalues()(0)) * sigma.basis().col(0);
  if (reference) align_sign(d, *reference);
  return d;
}

Mat sigma_dense(const LowRankSigma& sigma, std::size_t max_dim) {
  require(sigma.dim() <= max_dim, ErrorCode::InvalidArgument, "sigma_dense: dimension above dense threshold");
  return sigma.basis() * sigma.eigenvalues().asDiagonal() * sigma.basis().transpose();
}

double eigen_ratio(const LowRankSigma& sigma, double floor) {
  const Vec& l = sigma.eigenvalues();
  if (l.size() == 0) return 0.0;
  const double second = l.size() > 1 ? l(1) : 0.0;
  return l(0) / std::max(second, floor);
}

}  // namespace rodflow
