#include "rodflow/spectral.hpp"

#include "rodflow/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace rodflow {

namespace {

Vec random_unit(std::size_t p, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
  return v / v.norm();
}

struct PowerOutcome {
  double value = 0.0;
  Vec vector;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Power iteration on H + shift I.
PowerOutcome power_iterate(const LossSpec& spec, const Weights& w, Vec v, double shift, double tol, int max_iter) {
  PowerOutcome out;
  for (int it = 1; it <= max_iter; ++it) {
    const Vec hv = loss_hvp(spec, w, v);
    const double rho = v.dot(hv);
    const double res = (hv - rho * v).norm();
    out.value = rho;
    out.vector = v;
    out.residual = res;
    out.iterations = it;
    if (res <= tol * std::max(1.0, std::abs(rho))) {
      out.converged = true;
      return out;
    }
    Vec next = hv + shift * v;
    const double n = next.norm();
    if (n == 0.0 || !std::isfinite(n)) return out;
    v = next / n;
  }
  return out;
}

}  // namespace

SharpnessResult sharpness_pair(const LossSpec& spec, const Weights& w, const SpectralOptions& options,
                               const Vec* warm) {
  const std::size_t p = dimension(spec);
  require_same_dim(p, static_cast<std::size_t>(w.size()), "sharpness weights");
  require(options.tol > 0.0 && options.max_iter > 0, ErrorCode::InvalidArgument, "sharpness: bad options");
  std::mt19937_64 rng(options.seed);
  Vec start = (warm && warm->size() == w.size() && warm->norm() > 0.0) ? Vec(*warm / warm->norm())
                                                                      : random_unit(p, rng);
  if (p == 1) {
    const double h = loss_hvp(spec, w, Vec::Ones(1))(0);
    return {h, Vec::Ones(1), 0.0, 1};
  }

  PowerOutcome first = power_iterate(spec, w, start, 0.0, options.tol, options.max_iter);
  if (first.converged && first.value >= 0.0) return {first.value, first.vector, first.residual, first.iterations};

  // Dominant magnitude is negative (or the iteration is stuck between +-):
  // shift the spectrum positive and rerun.
  const Vec hv = loss_hvp(spec, w, first.vector);
  const double shift = std::max(std::abs(first.value), hv.norm()) + 1.0;
  PowerOutcome second = power_iterate(spec, w, random_unit(p, rng), shift, options.tol, options.max_iter);
  const int total = first.iterations + second.iterations;
  if (!second.converged) {
    throw NonConvergenceError("sharpness: power iteration did not converge", second.value, second.residual, total);
  }
  return {second.value, second.vector, second.residual, total};
}

double sharpness(const LossSpec& spec, const Weights& w, double tol, int max_iter) {
  SpectralOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  return sharpness_pair(spec, w, o).value;
}

EigResult top_k_eigs(const LossSpec& spec, const Weights& w, std::size_t k, const SpectralOptions& options,
                     const EigResult* warm) {
  const std::size_t p = dimension(spec);
  require_same_dim(p, static_cast<std::size_t>(w.size()), "top_k_eigs weights");
  require(k >= 1 && k <= 8 && k <= p, ErrorCode::InvalidArgument, "top_k_eigs: need 1 <= k <= min(8, p)");
  require(options.tol > 0.0 && options.max_iter > 0, ErrorCode::InvalidArgument, "top_k_eigs: bad options");
  const auto block = static_cast<Eigen::Index>(std::min(p, k + 2));
  const auto kk = static_cast<Eigen::Index>(k);
  std::mt19937_64 rng(options.seed);

  auto fill_orthonormal = [&](Mat v) {
    Mat q = orthonormalize_columns(v);
    while (q.cols() < block) {
      Mat grown(q.rows(), q.cols() + 1);
      grown << q, random_unit(p, rng);
      q = orthonormalize_columns(grown);
    }
    return q;
  };

  Mat start(static_cast<Eigen::Index>(p), block);
  Eigen::Index filled = 0;
  if (warm && warm->vectors.rows() == w.size())
    for (Eigen::Index j = 0; j < warm->vectors.cols() && filled < block; ++j) start.col(filled++) = warm->vectors.col(j);
  while (filled < block) start.col(filled++) = random_unit(p, rng);
  start = fill_orthonormal(start);

  struct Pass {
    EigResult result;
    double min_ritz = 0.0;
    bool converged = false;
  };
  auto run = [&](Mat v, double shift) {
    Pass pass;
    for (int it = 1; it <= options.max_iter; ++it) {
      Mat hv(v.rows(), v.cols());
      for (Eigen::Index j = 0; j < v.cols(); ++j) hv.col(j) = loss_hvp(spec, w, v.col(j));
      const SymmetricEigen e = jacobi_eigen(v.transpose() * hv);
      const Mat x = v * e.vectors;
      const Mat hx = hv * e.vectors;
      EigResult& r = pass.result;
      r.values = e.values.head(kk);
      r.vectors = x.leftCols(kk);
      r.residuals.resize(kk);
      r.iterations = it;
      pass.min_ritz = e.values.minCoeff();
      bool ok = true;
      for (Eigen::Index j = 0; j < kk; ++j) {
        r.residuals(j) = (hx.col(j) - e.values(j) * x.col(j)).norm();
        if (r.residuals(j) > options.tol * std::max(1.0, std::abs(e.values(j)))) ok = false;
      }
      if (ok) {
        pass.converged = true;
        return pass;
      }
      v = fill_orthonormal(hx + shift * x);
    }
    return pass;
  };

  Pass pass = run(start, 0.0);
  // Negative eigenvalues of large magnitude occupy the dominant subspace and
  // can hide the algebraically largest ones: shift and redo.
  if (pass.converged && pass.min_ritz < 0.0 && -pass.min_ritz > pass.result.values(kk - 1)) {
    const int used = pass.result.iterations;
    const double shift = 1.5 * std::abs(pass.min_ritz) + 1.0;
    pass = run(start, shift);
    pass.result.iterations += used;
  }
  pass.result.converged = pass.converged;
  return pass.result;
}

}  // namespace rodflow
