#include "doctest.h"

#include <rodflow/centralflow.hpp>
#include <rodflow/error.hpp>
#include <rodflow/spectral.hpp>

#include "support/oracles.hpp"

#include <Eigen/Eigenvalues>

using namespace rodflow;

namespace {

CriticalSubspace exact_subspace(const Vec& lambdas) {
  CriticalSubspace s;
  s.basis = Mat::Identity(lambdas.size() + 1, lambdas.size());
  s.lambdas = lambdas;
  return s;
}

Margin scalar_margin(double l) { return Margin{Mat::Constant(1, 1, l)}; }

SharpnessOperator scalar_op(double s) {
  SharpnessOperator op;
  op.k = 1;
  op.matrix = Mat::Constant(1, 1, s);
  return op;
}

Mat random_symmetric(Eigen::Index k, std::mt19937_64& rng, double scale) {
  Mat a(k, k);
  for (Eigen::Index j = 0; j < k; ++j) a.col(j) = testing::random_vec(static_cast<std::size_t>(k), rng, scale);
  return 0.5 * (a + a.transpose());
}

// Gram operator of random symmetric contraction vectors, PSD by construction.
SharpnessOperator random_op(std::size_t k, std::mt19937_64& rng) {
  std::vector<std::vector<Vec>> g(k, std::vector<Vec>(k));
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a; b < k; ++b) g[a][b] = g[b][a] = testing::random_vec(20, rng);
  return sharpness_operator_from_contractions(g);
}

double fd_sharpness_slope(const LossSpec& spec, const Weights& w, const Vec& dir, double h) {
  return (sharpness(spec, w + h * dir, 1e-13) - sharpness(spec, w - h * dir, 1e-13)) / (2 * h);
}

}  // namespace

TEST_CASE("margin from eigenvalues") {
  CHECK(build_margin(exact_subspace(Vec{{20.0}}), 0.1).matrix(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  const Mat m = build_margin(exact_subspace(Vec{{19.0, 15.0}}), 0.1).matrix;
  CHECK((m - Mat(Vec{{1.0, 5.0}}.asDiagonal())).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(build_margin(exact_subspace(Vec{{21.0}}), 0.1).matrix(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));

  const QuadraticND q(Vec{{19.0, 15.0, 3.0}}.asDiagonal());
  CriticalSubspace s = critical_subspace(q, Weights::Zero(3), 2);
  const Mat via_hvp = build_margin(q, Weights::Zero(3), s, 0.1).matrix;
  CHECK((via_hvp - Mat(Vec{{1.0, 5.0}}.asDiagonal())).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("sharpness operator") {
  std::mt19937_64 rng(30);
  const QuadraticND q(random_symmetric(4, rng, 1.0));
  const CriticalSubspace sq = critical_subspace(q, Weights::Zero(4), 2);
  CHECK(build_sharpness_operator(q, Weights::Zero(4), sq).matrix.norm() == 0.0);

  // Quartic: the contraction vanishes at the origin, so probe off it.
  for (double Q : {1.0, -1.0}) {
    const Quartic1D quartic(3.0, Q);
    const Weights w = Weights::Constant(1, 0.5);
    const CriticalSubspace s = critical_subspace(quartic, w, 1);
    const double op = build_sharpness_operator(quartic, w, s).matrix(0, 0);
    const double slope = fd_sharpness_slope(quartic, w, Vec::Ones(1), 1e-5);
    CHECK(slope * Q > 0.0);
    CHECK(op == doctest::Approx(0.5 * slope * slope).epsilon(1e-6));
    CHECK(build_sharpness_operator(quartic, Weights::Zero(1), s).matrix(0, 0) == 0.0);
  }

  const auto f = testing::make_mlp({2, 5, 1}, 16, 2.0, 1);
  const Weights w = mlp_init_weights(f.arch, 2);
  const CriticalSubspace s3 = critical_subspace(f.spec, w, 3);
  const SharpnessOperator op = build_sharpness_operator(f.spec, w, s3);
  CHECK(op.matrix.rows() == 9);
  CHECK((op.matrix - op.matrix.transpose()).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, op.matrix.norm()));
  CHECK(testing::dense_eigenvalues_desc(op.matrix).minCoeff() >= -1e-10 * std::max(1.0, op.matrix.norm()));
}

TEST_CASE("scalar complementarity examples") {
  CHECK(solve_sdcp(scalar_margin(0.5), scalar_op(1.0)).omega(0, 0) == 0.0);
  CHECK(solve_sdcp(scalar_margin(-0.5), scalar_op(1.0)).omega(0, 0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(solve_sdcp(scalar_margin(0.0), scalar_op(1.0)).omega(0, 0) == 0.0);
}

TEST_CASE("scalar closed form") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> lam(-3.0, 3.0), sv(0.05, 10.0);
  for (int i = 0; i < 100; ++i) {
    const double l = lam(rng), s = sv(rng);
    const double omega = solve_sdcp(scalar_margin(l), scalar_op(s)).omega(0, 0);
    CHECK(std::abs(omega - std::max(0.0, -l / s)) <= 1e-10);
  }
}

TEST_CASE("certificates and complementarity on random instances") {
  std::mt19937_64 rng(32);
  for (std::size_t k : {1, 2, 3}) {
    for (int i = 0; i < 100; ++i) {
      const Margin m{random_symmetric(static_cast<Eigen::Index>(k), rng, 1.0)};
      const SharpnessOperator op = random_op(k, rng);
      const Covariance c = solve_sdcp(m, op);
      const SdcpResiduals r = sdcp_residuals(m, op, c.omega);
      CHECK(r.min_eig_omega >= -1e-10);
      CHECK(r.min_eig_slack >= -1e-8);
      CHECK(std::abs(r.complementarity) <= 1e-8 * (1.0 + m.matrix.norm()));

      const Mat slack = m.matrix + op.apply(c.omega);
      Eigen::SelfAdjointEigenSolver<Mat> es(slack);
      for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j) {
        if (es.eigenvalues()(j) > 1e-8) {
          const Vec q = es.eigenvectors().col(j);
          CHECK(q.dot(c.omega * q) <= 1e-8);
        }
      }
    }
  }
}

TEST_CASE("operator defects") {
  SharpnessOperator bad;
  bad.k = 2;
  bad.matrix = Mat::Identity(4, 4);
  bad.matrix(3, 3) = -0.5;
  const Margin m{Mat(Vec{{-0.3, 0.2}}.asDiagonal())};
  const Covariance c = solve_sdcp(m, bad);
  CHECK(min_eigenvalue(c.omega) >= -1e-10);

  try {
    solve_sdcp(scalar_margin(-1.0), scalar_op(0.0));
    FAIL("expected an infeasible instance to fail");
  } catch (const SdcpError& e) {
    CHECK(e.residuals().min_eig_slack < 0.0);
  }
  CHECK_THROWS_AS(solve_sdcp(Margin{Mat::Zero(2, 2)}, scalar_op(1.0)), Error);
}

TEST_CASE("center drift") {
  const double eta = 0.4;
  const Weights w{{2.5, 0.2}};
  const CriticalSubspace s = critical_subspace(Sqrt2D{}, w, 1);
  Covariance zero;
  zero.omega = Mat::Zero(1, 1);
  CHECK(centralflow_rhs(Sqrt2D{}, w, zero, s, eta) == Vec(-eta * loss_grad(Sqrt2D{}, w)));

  Mat h(2, 2);
  h << 2.0, 0.3, 0.3, 1.0;
  const Weights wq{{0.1, -0.4}};
  const CriticalSubspace sq = critical_subspace(QuadraticND(h), wq, 2);
  Covariance any;
  any.omega = Mat{{2.0, 0.5}, {0.5, 1.0}};
  CHECK(centralflow_rhs(QuadraticND(h), wq, any, sq, eta) == Vec(-eta * (h * wq)));

  Covariance one;
  one.omega = Mat::Constant(1, 1, 0.3);
  const Vec rhs = centralflow_rhs(Sqrt2D{}, w, one, s, eta);
  Vec grad_s(2);
  for (int i = 0; i < 2; ++i) grad_s(i) = fd_sharpness_slope(Sqrt2D{}, w, Vec::Unit(2, i), 1e-5);
  const Vec oracle = -eta * loss_grad(Sqrt2D{}, w) - 0.5 * eta * 0.3 * grad_s;
  CHECK(testing::rel_err(rhs, oracle) < 1e-6);
}

TEST_CASE("below threshold the central flow is gradient flow") {
  FlowConfig c;
  c.eta = 0.1;
  c.horizon = 30;
  Mat h(2, 2);
  h << 5.0, 1.0, 1.0, 2.0;
  const Weights w0{{1.0, -2.0}};
  const CentralFlowTrajectory cf = centralflow_integrate(QuadraticND(h), w0, c);
  const Trajectory gf = gradient_flow_integrate(QuadraticND(h), w0, c);
  REQUIRE(cf.base.states.size() == gf.states.size());
  for (std::size_t i = 0; i < gf.states.size(); ++i) {
    CHECK((cf.base.states[i].wbar - gf.states[i].wbar).norm() <= 1e-14);
    CHECK(cf.omega_trace[i] == 0.0);
  }
}

TEST_CASE("central flow holds the sharpness at the threshold") {
  FlowConfig c;
  c.eta = 0.4;
  c.horizon = 100;
  RecordOptions ro;
  ro.sharpness_every = 1;
  CentralFlowOptions o;
  o.eig_cadence = 1;
  const double threshold = 2.0 / c.eta;
  const CentralFlowTrajectory t = centralflow_integrate(Sqrt2D{}, Weights{{4.0, 0.1}}, c, o, ro);
  CHECK(t.base.termination == Termination::Completed);
  CHECK(t.base.rows.front().sharpness_center > 2 * threshold);
  bool relaxed = false;
  for (std::size_t i = 0; i < t.base.rows.size(); ++i) {
    const double s = t.base.rows[i].sharpness_center;
    if (!relaxed && s <= 1.05 * threshold) relaxed = true;
    if (relaxed) CHECK(s <= 1.05 * threshold);
    CHECK(t.omega_trace[i] >= 0.0);
  }
  CHECK(relaxed);
  CHECK(t.base.rows.back().sharpness_center == doctest::Approx(threshold).epsilon(0.01));
}

TEST_CASE("central flow stepper reports oscillation direction") {
  FlowConfig c;
  c.eta = 0.4;
  CentralFlowStepper st(Sqrt2D{}, c, {}, Weights{{3.0, 0.1}});
  for (int i = 0; i < 30; ++i) REQUIRE(st.advance_unit());
  const Vec d = st.delta();
  const Covariance cov = st.covariance_now();
  CHECK(d.norm() == doctest::Approx(std::sqrt(cov.omega(0, 0))).epsilon(1e-12));
  CHECK(std::abs(std::abs(d.normalized().dot(st.subspace().basis.col(0))) - 1.0) < 1e-12);
  CHECK(st.margin_min_now() <= 1e-6);
}
