#include "doctest.h"

#include <rodflow/error.hpp>
#include <rodflow/spectral.hpp>

#include "support/oracles.hpp"

using namespace rodflow;

namespace {

QuadraticND diag(std::initializer_list<double> v) {
  Vec d(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) d(i++) = x;
  return QuadraticND(d.asDiagonal());
}

void check_certified(const LossSpec& spec, const Weights& w, const EigResult& r, double tol) {
  const Mat g = r.vectors.transpose() * r.vectors;
  CHECK((g - Mat::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() < 1e-8);
  for (Eigen::Index i = 0; i < r.values.size(); ++i) {
    const Vec v = r.vectors.col(i);
    const double res = (loss_hvp(spec, w, v) - r.values(i) * v).norm();
    CHECK(res <= tol * std::max(1.0, std::abs(r.values(i))));
    if (i > 0) CHECK(r.values(i) <= r.values(i - 1));
  }
}

}  // namespace

TEST_CASE("sharpness of known spectra") {
  CHECK(sharpness(diag({3.0, 1.0}), Weights::Zero(2)) == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(sharpness(Quartic1D(7.5, 2.0), Weights::Zero(1)) == doctest::Approx(7.5).epsilon(1e-12));
  CHECK(sharpness(diag({-10.0, 1.0}), Weights::Zero(2)) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sharpness(diag({-5.0, -1.0}), Weights::Zero(2)) == doctest::Approx(-1.0).epsilon(1e-8));
  CHECK(sharpness(Sqrt2D{}, Weights{{2.0, 0.0}}) == doctest::Approx(4.0).epsilon(1e-8));
}

TEST_CASE("sharpness of an mlp matches the dense Hessian") {
  for (std::uint64_t seed : {0, 1, 2}) {
    const auto f = testing::make_mlp({2, 6, 1}, 16, 2.0, seed);
    REQUIRE(dimension(f.spec) <= 40);
    const Weights w = mlp_init_weights(f.arch, seed + 7);
    const double oracle = testing::dense_eigenvalues_desc(testing::dense_hessian(f.spec, w))(0);
    CHECK(testing::rel_err(sharpness(f.spec, w), oracle) < 1e-6);
  }
}

TEST_CASE("sharpness pair is certified and deterministic") {
  const auto f = testing::make_mlp({3, 4, 2}, 12, 1.0, 3);
  const Weights w = mlp_init_weights(f.arch, 3);
  const SharpnessResult a = sharpness_pair(f.spec, w), b = sharpness_pair(f.spec, w);
  CHECK(a.value == b.value);
  CHECK(a.vector == b.vector);
  CHECK((loss_hvp(f.spec, w, a.vector) - a.value * a.vector).norm() <= 1e-8 * std::max(1.0, std::abs(a.value)));
}

TEST_CASE("sharpness reports non-convergence with its best estimate") {
  try {
    sharpness(diag({3.0, 2.999, 1.0}), Weights::Zero(3), 1e-14, 3);
    FAIL("expected non-convergence");
  } catch (const NonConvergenceError& e) {
    CHECK(e.code() == ErrorCode::NonConvergence);
    CHECK(e.estimate() > 2.5);
    CHECK(e.estimate() <= 3.0 + 1e-12);
    CHECK(e.residual() > 0.0);
  }
}

TEST_CASE("top-k eigenpairs") {
  const EigResult r = top_k_eigs(diag({5.0, 4.0, 1.0}), Weights::Zero(3), 2);
  CHECK(r.converged);
  CHECK(r.values(0) == doctest::Approx(5.0).epsilon(1e-8));
  CHECK(r.values(1) == doctest::Approx(4.0).epsilon(1e-8));
  check_certified(diag({5.0, 4.0, 1.0}), Weights::Zero(3), r, 1e-8);

  std::mt19937_64 rng(20);
  Mat a(6, 6);
  for (Eigen::Index j = 0; j < 6; ++j) a.col(j) = testing::random_vec(6, rng);
  const QuadraticND q((a + a.transpose()) / 2);
  const EigResult full = top_k_eigs(q, Weights::Zero(6), 6);
  CHECK(full.converged);
  CHECK((full.values - testing::dense_eigenvalues_desc(q.hessian())).cwiseAbs().maxCoeff() < 1e-8);
  check_certified(q, Weights::Zero(6), full, 1e-8);

  const EigResult clustered = top_k_eigs(diag({3.0, 3.0, 1.0, 0.5}), Weights::Zero(4), 2);
  CHECK(clustered.values(0) == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(clustered.values(1) == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("top-k on an mlp") {
  const auto f = testing::make_mlp({2, 5, 1}, 16, 2.0, 4);
  const Weights w = mlp_init_weights(f.arch, 4);
  const EigResult r = top_k_eigs(f.spec, w, 3);
  CHECK(r.converged);
  check_certified(f.spec, w, r, 1e-8);
  const Vec oracle = testing::dense_eigenvalues_desc(testing::dense_hessian(f.spec, w));
  for (int i = 0; i < 3; ++i) CHECK(testing::rel_err(r.values(i), oracle(i)) < 1e-6);
  const EigResult again = top_k_eigs(f.spec, w, 3);
  CHECK(again.values == r.values);
  CHECK(again.vectors == r.vectors);
}

TEST_CASE("warm start saves iterations") {
  const auto f = testing::make_mlp({2, 5, 1}, 16, 2.0, 5);
  const Weights w = mlp_init_weights(f.arch, 5);
  std::mt19937_64 rng(21);
  Vec step = testing::random_vec(dimension(f.spec), rng);
  const Weights moved = w + 1e-3 * step / step.norm();
  const EigResult first = top_k_eigs(f.spec, w, 2);
  const EigResult cold = top_k_eigs(f.spec, moved, 2);
  const EigResult warm = top_k_eigs(f.spec, moved, 2, {}, &first);
  CHECK(cold.converged);
  CHECK(warm.converged);
  CHECK(warm.iterations < cold.iterations);
  CHECK((warm.values - cold.values).cwiseAbs().maxCoeff() < 1e-7);

  const SharpnessResult s0 = sharpness_pair(f.spec, w);
  const SharpnessResult sc = sharpness_pair(f.spec, moved);
  const SharpnessResult sw = sharpness_pair(f.spec, moved, {}, &s0.vector);
  CHECK(sw.iterations < sc.iterations);
}

TEST_CASE("top-k flags non-convergence instead of throwing") {
  SpectralOptions o;
  o.max_iter = 2;
  o.tol = 1e-14;
  const EigResult r = top_k_eigs(diag({3.0, 2.99, 2.98, 1.0, 0.5}), Weights::Zero(5), 2, o);
  CHECK_FALSE(r.converged);
  CHECK(r.values.size() == 2);
  CHECK_THROWS_AS(top_k_eigs(diag({1.0, 2.0}), Weights::Zero(2), 0), Error);
  CHECK_THROWS_AS(top_k_eigs(diag({1.0, 2.0}), Weights::Zero(2), 3), Error);
}
