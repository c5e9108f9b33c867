#include "rodflow/centralflow.hpp"

#include "rodflow/error.hpp"

#include <cmath>
#include <iostream>
#include <limits>

namespace rodflow {

void CriticalSubspace::validate() const {
  require(basis.cols() == lambdas.size() && basis.cols() >= 1, ErrorCode::DimensionMismatch,
          "critical subspace: basis/eigenvalue count mismatch");
  const Mat gram = basis.transpose() * basis;
  require((gram - Mat::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-8, ErrorCode::InvalidArgument,
          "critical subspace: basis not orthonormal");
}

CriticalSubspace critical_subspace(const LossSpec& spec, const Weights& w, std::size_t k,
                                   const SpectralOptions& options, const CriticalSubspace* warm) {
  require(k >= 1 && k <= 3, ErrorCode::InvalidArgument, "critical subspace: k must lie in [1, 3]");
  EigResult seed;
  if (warm) seed.vectors = warm->basis;
  const EigResult r = top_k_eigs(spec, w, k, options, warm ? &seed : nullptr);
  return {r.vectors, r.values};
}

Margin build_margin(const CriticalSubspace& subspace, double eta) {
  require(eta > 0.0, ErrorCode::InvalidArgument, "build_margin: eta must be positive");
  const Vec d = (2.0 / eta) * Vec::Ones(subspace.lambdas.size()) - subspace.lambdas;
  return {d.asDiagonal()};
}

Margin build_margin(const LossSpec& spec, const Weights& w, const CriticalSubspace& subspace, double eta) {
  require(eta > 0.0, ErrorCode::InvalidArgument, "build_margin: eta must be positive");
  const Eigen::Index k = subspace.basis.cols();
  Mat hu(subspace.basis.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) hu.col(j) = loss_hvp(spec, w, subspace.basis.col(j));
  const Mat uhu = subspace.basis.transpose() * hu;
  return {(2.0 / eta) * Mat::Identity(k, k) - 0.5 * (uhu + uhu.transpose())};
}

Mat SharpnessOperator::apply(const Mat& omega) const {
  const auto kk = static_cast<Eigen::Index>(k);
  require(omega.rows() == kk && omega.cols() == kk, ErrorCode::DimensionMismatch, "sharpness operator: bad Omega");
  Vec v(kk * kk);
  for (Eigen::Index a = 0; a < kk; ++a)
    for (Eigen::Index b = 0; b < kk; ++b) v(a * kk + b) = omega(a, b);
  const Vec r = matrix * v;
  Mat out(kk, kk);
  for (Eigen::Index a = 0; a < kk; ++a)
    for (Eigen::Index b = 0; b < kk; ++b) out(a, b) = r(a * kk + b);
  return out;
}

std::vector<std::vector<Vec>> third_contractions(const LossSpec& spec, const Weights& w, const Mat& basis) {
  const auto k = static_cast<std::size_t>(basis.cols());
  std::vector<std::vector<Vec>> g(k, std::vector<Vec>(k));
  for (std::size_t i = 0; i < k; ++i) {
    const Vec ui = basis.col(static_cast<Eigen::Index>(i));
    g[i][i] = loss_third_contract(spec, w, ui);
    for (std::size_t j = 0; j < i; ++j) {
      const Vec uj = basis.col(static_cast<Eigen::Index>(j));
      g[i][j] = 0.25 * (loss_third_contract(spec, w, ui + uj) - loss_third_contract(spec, w, ui - uj));
      g[j][i] = g[i][j];
    }
  }
  return g;
}

SharpnessOperator sharpness_operator_from_contractions(const std::vector<std::vector<Vec>>& g) {
  const std::size_t k = g.size();
  const auto n = static_cast<Eigen::Index>(k * k);
  SharpnessOperator op;
  op.k = k;
  op.matrix = Mat::Zero(n, n);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
          op.matrix(static_cast<Eigen::Index>(a * k + b), static_cast<Eigen::Index>(i * k + j)) =
              0.5 * g[a][b].dot(g[i][j]);
  op.matrix = 0.5 * (op.matrix + op.matrix.transpose());
  return op;
}

SharpnessOperator build_sharpness_operator(const LossSpec& spec, const Weights& w, const CriticalSubspace& subspace) {
  require(subspace.basis.cols() >= 1 && subspace.basis.cols() <= 3, ErrorCode::InvalidArgument,
          "sharpness operator: k must lie in [1, 3]");
  return sharpness_operator_from_contractions(third_contractions(spec, w, subspace.basis));
}

SdcpError::SdcpError(const std::string& message, SdcpResiduals residuals, int iterations)
    : NonConvergenceError(message, residuals.min_eig_slack, residuals.complementarity, iterations),
      residuals_(residuals) {}

SdcpResiduals sdcp_residuals(const Margin& margin, const SharpnessOperator& op, const Mat& omega) {
  const Mat slack = margin.matrix + op.apply(omega);
  SdcpResiduals r;
  r.min_eig_omega = min_eigenvalue(omega);
  r.min_eig_slack = min_eigenvalue(slack);
  r.complementarity = (omega.array() * slack.array()).sum();
  return r;
}

namespace {

bool certified(const SdcpResiduals& r, double tol, double lambda_norm) {
  return r.min_eig_omega >= -tol && r.min_eig_slack >= -tol && std::abs(r.complementarity) <= tol * (1.0 + lambda_norm);
}

}  // namespace

Covariance solve_sdcp(const Margin& margin, const SharpnessOperator& op_in, double tol, int max_iter,
                      const Mat* warm) {
  const auto k = static_cast<Eigen::Index>(op_in.k);
  require(margin.matrix.rows() == k && margin.matrix.cols() == k, ErrorCode::DimensionMismatch,
          "solve_sdcp: margin/operator size mismatch");
  require(tol > 0.0 && max_iter > 0, ErrorCode::InvalidArgument, "solve_sdcp: bad tolerance or cap");
  require(all_finite(margin.matrix) && all_finite(op_in.matrix), ErrorCode::NonFinite, "solve_sdcp: non-finite input");

  SharpnessOperator op = op_in;
  const SymmetricEigen spectrum = jacobi_eigen(op.matrix);
  const double norm = std::max(0.0, spectrum.values(0));
  if (spectrum.values.minCoeff() < -1e-12 * std::max(1.0, norm)) {
    std::clog << "rodflow: warning: sharpness operator not PSD (min eigenvalue " << spectrum.values.minCoeff()
              << "), clamping\n";
    op.matrix = project_psd(op.matrix);
    op.clamped = true;
  }

  const Mat lambda = 0.5 * (margin.matrix + margin.matrix.transpose());
  const double lambda_norm = lambda.norm();
  Mat omega = Mat::Zero(k, k);
  if (warm && warm->rows() == k && warm->cols() == k) omega = project_psd(*warm);

  Covariance out;
  if (norm == 0.0) {
    out.omega = Mat::Zero(k, k);
    out.residuals = sdcp_residuals({lambda}, op, out.omega);
    if (!certified(out.residuals, tol, lambda_norm))
      throw SdcpError("solve_sdcp: negative margin with zero sharpness operator is infeasible", out.residuals, 0);
    return out;
  }

  // Accelerated projected gradient, momentum reset whenever it points uphill.
  const double step = 1.0 / norm;
  SdcpResiduals res;
  Mat previous = omega;
  double t = 1.0;
  for (int it = 0; it <= max_iter; ++it) {
    res = sdcp_residuals({lambda}, op, omega);
    if (certified(res, tol, lambda_norm)) {
      out.omega = omega;
      out.residuals = res;
      out.iterations = it;
      return out;
    }
    if (it == max_iter) break;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const Mat y = omega + ((t - 1.0) / t_next) * (omega - previous);
    Mat next = project_psd(y - step * (lambda + op.apply(y)));
    next = 0.5 * (next + next.transpose());
    if (((y - next).array() * (next - omega).array()).sum() > 0.0) {
      t = 1.0;
      next = project_psd(omega - step * (lambda + op.apply(omega)));
      next = 0.5 * (next + next.transpose());
    } else {
      t = t_next;
    }
    previous = omega;
    omega = next;
  }
  throw SdcpError("solve_sdcp: iteration cap reached", res, max_iter);
}

namespace {

Weights drift_from(const std::vector<std::vector<Vec>>& g, const Mat& omega, Eigen::Index p) {
  Weights acc = Weights::Zero(p);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j)
      acc += omega(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * g[i][j];
  return acc;
}

}  // namespace

Weights centralflow_rhs(const LossSpec& spec, const Weights& wbar, const Covariance& cov,
                        const CriticalSubspace& subspace, double eta) {
  require(eta > 0.0, ErrorCode::InvalidArgument, "centralflow_rhs: eta must be positive");
  require(cov.omega.rows() == subspace.basis.cols() && cov.omega.cols() == subspace.basis.cols(),
          ErrorCode::DimensionMismatch, "centralflow_rhs: Omega does not match subspace");
  Weights d = -eta * loss_grad(spec, wbar);
  if (cov.omega.cwiseAbs().maxCoeff() == 0.0) return d;
  const auto g = third_contractions(spec, wbar, subspace.basis);
  return d - 0.5 * eta * drift_from(g, cov.omega, wbar.size());
}

CentralFlowStepper::CentralFlowStepper(LossSpec spec, FlowConfig config, CentralFlowOptions options, Weights w0)
    : spec_(std::move(spec)), config_(config), options_(options), wbar_(std::move(w0)) {
  config_.validate();
  require(options_.k >= 1 && options_.k <= 3, ErrorCode::InvalidArgument, "central flow: k must lie in [1, 3]");
  require(options_.k <= dimension(spec_), ErrorCode::InvalidArgument, "central flow: k exceeds dimension");
  require(options_.eig_cadence >= 1, ErrorCode::InvalidArgument, "central flow: eig cadence must be >= 1");
  require_same_dim(dimension(spec_), static_cast<std::size_t>(wbar_.size()), "central flow initial weights");
  last_omega_ = Mat::Zero(static_cast<Eigen::Index>(options_.k), static_cast<Eigen::Index>(options_.k));
  refresh_subspace();
}

void CentralFlowStepper::refresh_subspace() {
  subspace_ = critical_subspace(spec_, wbar_, options_.k, options_.spectral, subspace_.basis.size() ? &subspace_ : nullptr);
}

void CentralFlowStepper::fail(Termination t, std::string detail) {
  running_ = false;
  termination_ = t;
  detail_ = std::move(detail);
}

Weights CentralFlowStepper::rhs(const Weights& w) {
  const Margin margin = build_margin(spec_, w, subspace_, config_.eta);
  const auto g = third_contractions(spec_, w, subspace_.basis);
  const SharpnessOperator op = sharpness_operator_from_contractions(g);
  const Covariance cov = solve_sdcp(margin, op, options_.sdcp_tol, options_.sdcp_max_iter, &last_omega_);
  last_omega_ = cov.omega;
  return -config_.eta * loss_grad(spec_, w) - 0.5 * config_.eta * drift_from(g, cov.omega, w.size());
}

Covariance CentralFlowStepper::covariance_now() const {
  const Margin margin = build_margin(spec_, wbar_, subspace_, config_.eta);
  const SharpnessOperator op = build_sharpness_operator(spec_, wbar_, subspace_);
  return solve_sdcp(margin, op, options_.sdcp_tol, options_.sdcp_max_iter, &last_omega_);
}

double CentralFlowStepper::margin_min_now() const {
  return min_eigenvalue(build_margin(spec_, wbar_, subspace_, config_.eta).matrix);
}

Vec CentralFlowStepper::delta() {
  const Covariance cov = covariance_now();
  const SymmetricEigen e = jacobi_eigen(cov.omega);
  Vec d = std::sqrt(std::max(0.0, e.values(0))) * (subspace_.basis * e.vectors.col(0));
  if (last_delta_.size()) align_sign(d, last_delta_);
  last_delta_ = d;
  return d;
}

bool CentralFlowStepper::advance_unit() {
  if (!running_) return false;
  const double h = config_.dt;
  const int n = config_.substeps_per_unit();
  try {
    if (units_ > 0 && units_ % options_.eig_cadence == 0) refresh_subspace();
    for (int i = 0; i < n; ++i) {
      Weights next;
      if (config_.integrator == Integrator::Euler) {
        next = wbar_ + h * rhs(wbar_);
      } else {
        const Weights k1 = rhs(wbar_);
        const Weights k2 = rhs(wbar_ + 0.5 * h * k1);
        const Weights k3 = rhs(wbar_ + 0.5 * h * k2);
        const Weights k4 = rhs(wbar_ + h * k3);
        next = wbar_ + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      const double norm = next.norm();
      if (!std::isfinite(norm) || norm > kDivergenceBound) {
        fail(Termination::Diverged, "central flow state diverged at t=" + std::to_string(time_ + h));
        return false;
      }
      wbar_ = std::move(next);
      time_ += h;
    }
  } catch (const SdcpError& e) {
    fail(Termination::SolverFailure, std::string("sdcp: ") + e.what());
    return false;
  } catch (const NonConvergenceError& e) {
    fail(Termination::SolverFailure, e.what());
    return false;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonFinite) throw;
    fail(Termination::Diverged, e.what());
    return false;
  }
  ++units_;
  time_ = static_cast<double>(units_);
  return true;
}

CentralFlowTrajectory centralflow_integrate(const LossSpec& spec, const Weights& w0, const FlowConfig& config,
                                            const CentralFlowOptions& options, const RecordOptions& record) {
  config.validate();
  CentralFlowStepper stepper(spec, config, options, w0);
  CentralFlowTrajectory out;
  const auto units = static_cast<long>(std::ceil(config.horizon - 1e-9));
  double sharp = std::numeric_limits<double>::quiet_NaN();
  Vec warm;
  auto emit = [&](long index) {
    const Weights& w = stepper.wbar();
    const Vec d = stepper.delta();
    TrajectoryRow row;
    row.time = stepper.time();
    row.loss_center = loss_value(spec, w);
    row.loss_edge_plus = loss_value(spec, w + d);
    row.loss_edge_minus = loss_value(spec, w - d);
    row.delta_norm = d.norm();
    if (record.sharpness_every > 0 && index % record.sharpness_every == 0) {
      const SharpnessResult r = sharpness_pair(spec, w, record.spectral, warm.size() ? &warm : nullptr);
      sharp = r.value;
      warm = r.vector;
    }
    row.sharpness_center = sharp;
    out.base.rows.push_back(row);
    if (record.keep_states)
      out.base.states.push_back(RodState{w, LowRankSigma(static_cast<std::size_t>(w.size()), 1), row.time});
    out.omega_trace.push_back(stepper.covariance_now().omega.trace());
    out.margin_min.push_back(stepper.margin_min_now());
  };
  try {
    emit(0);
    for (long u = 1; u <= units; ++u) {
      if (!stepper.advance_unit()) break;
      emit(u);
    }
  } catch (const SdcpError& e) {
    out.base.termination = Termination::SolverFailure;
    out.base.detail = std::string("sdcp: ") + e.what();
  }
  out.base.final_state = RodState{stepper.wbar(), LowRankSigma(static_cast<std::size_t>(stepper.wbar().size()), 1),
                                  stepper.time()};
  if (out.base.termination == Termination::Completed) {
    out.base.termination = stepper.termination();
    out.base.detail = stepper.detail();
  }
  return out;
}

}  // namespace rodflow
