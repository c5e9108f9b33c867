#include "rodflow/flows.hpp"

#include "rodflow/error.hpp"

#include <cmath>
#include <limits>

namespace rodflow {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

void FlowConfig::validate() const {
  require(std::isfinite(eta) && eta > 0.0, ErrorCode::InvalidArgument, "flow config: eta must be positive");
  require(dt > 0.0 && dt <= 0.25, ErrorCode::InvalidArgument, "flow config: dt must lie in (0, 0.25]");
  require(horizon >= dt, ErrorCode::InvalidArgument, "flow config: horizon must be at least dt");
  const double n = 1.0 / dt;
  require(std::abs(n - std::round(n)) <= 1e-9 * n, ErrorCode::InvalidArgument,
          "flow config: 1/dt must be a whole number of substeps");
  require(rank >= 1 && rank <= 8, ErrorCode::InvalidArgument, "flow config: rank must lie in [1, 8]");
}

int FlowConfig::substeps_per_unit() const { return static_cast<int>(std::lround(1.0 / dt)); }

double sigma_trace(const SigmaRep& sigma) {
  return std::visit(Overloaded{[](const DenseSigma& d) { return d.matrix.trace(); },
                               [](const LowRankSigma& l) { return l.trace(); }},
                    sigma);
}

std::size_t sigma_dim(const SigmaRep& sigma) {
  return std::visit(Overloaded{[](const DenseSigma& d) { return static_cast<std::size_t>(d.matrix.rows()); },
                               [](const LowRankSigma& l) { return l.dim(); }},
                    sigma);
}

Vec sigma_delta(const SigmaRep& sigma, const Vec* reference) {
  return std::visit(Overloaded{[&](const DenseSigma& d) {
                                 const TopPair top = dense_top_pair(d.matrix);
                                 Vec delta = std::sqrt(top.value) * top.vector;
                                 if (reference) align_sign(delta, *reference);
                                 return delta;
                               },
                               [&](const LowRankSigma& l) { return principal_delta(l, reference); }},
                    sigma);
}

double sigma_eigen_ratio(const SigmaRep& sigma) {
  return std::visit(Overloaded{[](const DenseSigma& d) {
                                 if (d.matrix.rows() < 2) return std::numeric_limits<double>::infinity();
                                 Eigen::SelfAdjointEigenSolver<Mat> solver(d.matrix, Eigen::EigenvaluesOnly);
                                 const Vec& ev = solver.eigenvalues();
                                 const Eigen::Index n = ev.size();
                                 return std::max(ev(n - 1), 0.0) / std::max(ev(n - 2), 1e-300);
                               },
                               [](const LowRankSigma& l) { return eigen_ratio(l); }},
                    sigma);
}

double sigma_min_eigenvalue(const SigmaRep& sigma) {
  return std::visit(Overloaded{[](const DenseSigma& d) {
                                 Eigen::SelfAdjointEigenSolver<Mat> solver(d.matrix, Eigen::EigenvaluesOnly);
                                 return solver.eigenvalues()(0);
                               },
                               [](const LowRankSigma& l) {
                                 return l.active_rank() < l.dim() ? 0.0 : l.eigenvalues().minCoeff();
                               }},
                    sigma);
}

SigmaRep sigma_from_delta(const Vec& delta, std::size_t dense_threshold, std::size_t rank) {
  require(all_finite(delta), ErrorCode::NonFinite, "sigma_from_delta: non-finite delta");
  if (static_cast<std::size_t>(delta.size()) <= dense_threshold) return DenseSigma{delta * delta.transpose()};
  return LowRankSigma::from_outer(delta, rank);
}

RodState make_rod_state(const Weights& wbar, const Vec& delta, const FlowConfig& config) {
  require_same_dim(static_cast<std::size_t>(wbar.size()), static_cast<std::size_t>(delta.size()), "rod state delta");
  return RodState{wbar, sigma_from_delta(delta, config.dense_threshold, config.rank), 0.0};
}

Weights gd_step(const LossSpec& spec, const Weights& w, double eta) {
  require(eta > 0.0, ErrorCode::InvalidArgument, "gd_step: eta must be positive");
  return w - eta * loss_grad(spec, w);
}

RodCoordinates to_rod(const Weights& w_t, const Weights& w_next) {
  require_same_dim(static_cast<std::size_t>(w_t.size()), static_cast<std::size_t>(w_next.size()), "to_rod pair");
  return {0.5 * (w_next + w_t), 0.5 * (w_next - w_t)};
}

RodDifference rod_difference_step(const LossSpec& spec, const Weights& wbar, const Weights& delta, double eta) {
  require(eta > 0.0, ErrorCode::InvalidArgument, "rod_difference_step: eta must be positive");
  require_same_dim(static_cast<std::size_t>(wbar.size()), static_cast<std::size_t>(delta.size()),
                   "rod_difference_step delta");
  const Weights gp = loss_grad(spec, wbar + delta);
  const Weights gm = loss_grad(spec, wbar - delta);
  RodDifference out;
  out.wbar = wbar - 0.5 * eta * (gp + gm);
  out.outer = 0.25 * eta * eta * (gp * gp.transpose() + gm * gm.transpose()) - delta * delta.transpose();
  return out;
}

Mat SigmaDrift::dense(const Mat& sigma) const {
  return coefficient * (a * a.transpose() + b * b.transpose()) - 2.0 * sigma;
}

Weights gradient_flow_rhs(const LossSpec& spec, const Weights& w, double eta) { return -eta * loss_grad(spec, w); }

RodDerivative rodflow_rhs_at(const LossSpec& spec, const Weights& wbar, const Vec& delta, double eta) {
  const Weights wp = wbar + delta, wm = wbar - delta;
  const Weights gp = loss_grad(spec, wp);
  const Weights gm = loss_grad(spec, wm);
  const Weights gsum = gp + gm;
  const Weights correction = loss_hvp(spec, wp, gsum) + loss_hvp(spec, wm, gsum);
  RodDerivative d;
  d.dwbar = -0.5 * eta * gsum - 0.125 * eta * eta * correction;
  d.dsigma = SigmaDrift{gp, gm, 0.25 * eta * eta};
  return d;
}

RodDerivative fo_rodflow_rhs_at(const LossSpec& spec, const Weights& wbar, const Vec& delta, double eta) {
  const Weights hd = loss_hvp(spec, wbar, delta);
  RodDerivative d;
  d.dwbar = -eta * loss_grad(spec, wbar) - 0.5 * eta * loss_third_contract(spec, wbar, delta);
  // (eta^2 / 2) Hd Hd^T, split evenly over the two slots
  d.dsigma = SigmaDrift{hd, hd, 0.25 * eta * eta};
  return d;
}

RodDerivative rodflow_rhs(const LossSpec& spec, const RodState& state, double eta) {
  require_same_dim(static_cast<std::size_t>(state.wbar.size()), sigma_dim(state.sigma), "rod state sigma");
  return rodflow_rhs_at(spec, state.wbar, sigma_delta(state.sigma), eta);
}

RodDerivative fo_rodflow_rhs(const LossSpec& spec, const RodState& state, double eta) {
  require_same_dim(static_cast<std::size_t>(state.wbar.size()), sigma_dim(state.sigma), "rod state sigma");
  return fo_rodflow_rhs_at(spec, state.wbar, sigma_delta(state.sigma), eta);
}

Weights gradient_flow_step(const LossSpec& spec, const Weights& w, double eta, double dt, Integrator integrator) {
  if (integrator == Integrator::Euler) return w + dt * gradient_flow_rhs(spec, w, eta);
  const Weights k1 = gradient_flow_rhs(spec, w, eta);
  const Weights k2 = gradient_flow_rhs(spec, w + 0.5 * dt * k1, eta);
  const Weights k3 = gradient_flow_rhs(spec, w + 0.5 * dt * k2, eta);
  const Weights k4 = gradient_flow_rhs(spec, w + dt * k3, eta);
  return w + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::string_view flow_name(FlowKind kind) {
  switch (kind) {
    case FlowKind::Gradient: return "gf";
    case FlowKind::Rod: return "rf";
    case FlowKind::FirstOrderRod: return "fo_rf";
  }
  return "unknown";
}

std::string_view termination_name(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::Diverged: return "diverged";
    case Termination::SolverFailure: return "solver_failure";
  }
  return "unknown";
}

FlowStepper::FlowStepper(LossSpec spec, FlowKind kind, FlowConfig config, RodState initial)
    : spec_(std::move(spec)), kind_(kind), config_(config), state_(std::move(initial)) {
  config_.validate();
  require_same_dim(dimension(spec_), static_cast<std::size_t>(state_.wbar.size()), "flow initial state");
  require_same_dim(dimension(spec_), sigma_dim(state_.sigma), "flow initial sigma");
  if (const auto* d = std::get_if<DenseSigma>(&state_.sigma)) {
    require(static_cast<std::size_t>(d->matrix.rows()) <= config_.dense_threshold, ErrorCode::InvalidArgument,
            "flow: dense sigma above dense threshold");
  }
  require(all_finite(state_.wbar), ErrorCode::NonFinite, "flow: non-finite initial state");
}

Vec FlowStepper::delta() {
  if (kind_ == FlowKind::Gradient) return Vec::Zero(state_.wbar.size());
  Vec d = sigma_delta(state_.sigma, last_delta_.size() ? &last_delta_ : nullptr);
  last_delta_ = d;
  return d;
}

void FlowStepper::fail(Termination t, std::string detail) {
  running_ = false;
  termination_ = t;
  detail_ = std::move(detail);
}

bool FlowStepper::substep(double h) {
  const double eta = config_.eta;
  const bool rk4 = config_.integrator == Integrator::Rk4;
  RodState next = state_;

  if (kind_ == FlowKind::Gradient) {
    next.wbar = gradient_flow_step(spec_, state_.wbar, eta, h, config_.integrator);
  } else {
    auto rhs = [&](const Weights& w, const Vec& delta) {
      return kind_ == FlowKind::Rod ? rodflow_rhs_at(spec_, w, delta, eta) : fo_rodflow_rhs_at(spec_, w, delta, eta);
    };
    if (const auto* dense = std::get_if<DenseSigma>(&state_.sigma)) {
      const Mat& s0 = dense->matrix;
      const RodDerivative k1 = rhs(state_.wbar, sigma_delta(state_.sigma));
      const Mat k1s = k1.dsigma.dense(s0);
      if (!rk4) {
        next.wbar = state_.wbar + h * k1.dwbar;
        next.sigma = DenseSigma{s0 + h * k1s};
      } else {
        auto stage = [&](const Weights& dw, const Mat& ds, double c) {
          const Weights w = state_.wbar + c * dw;
          const Mat s = s0 + c * ds;
          const RodDerivative k = rhs(w, sigma_delta(DenseSigma{s}));
          return std::pair<Weights, Mat>{k.dwbar, k.dsigma.dense(s)};
        };
        const auto [k2w, k2s] = stage(k1.dwbar, k1s, 0.5 * h);
        const auto [k3w, k3s] = stage(k2w, k2s, 0.5 * h);
        const auto [k4w, k4s] = stage(k3w, k3s, h);
        next.wbar = state_.wbar + h / 6.0 * (k1.dwbar + 2.0 * k2w + 2.0 * k3w + k4w);
        Mat s = s0 + h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
        next.sigma = DenseSigma{0.5 * (s + s.transpose())};
      }
    } else {
      // Low-rank: w-bar with delta frozen over the substep; sigma by one
      // decay + injection using the substep-start drift.
      const auto& lr = std::get<LowRankSigma>(state_.sigma);
      const Vec delta = principal_delta(lr);
      const RodDerivative k1 = rhs(state_.wbar, delta);
      if (!rk4) {
        next.wbar = state_.wbar + h * k1.dwbar;
      } else {
        const Weights k2 = rhs(state_.wbar + 0.5 * h * k1.dwbar, delta).dwbar;
        const Weights k3 = rhs(state_.wbar + 0.5 * h * k2, delta).dwbar;
        const Weights k4 = rhs(state_.wbar + h * k3, delta).dwbar;
        next.wbar = state_.wbar + h / 6.0 * (k1.dwbar + 2.0 * k2 + 2.0 * k3 + k4);
      }
      LowRankSigma s = sigma_decay(lr, h);
      next.sigma = sigma_inject(s, k1.dsigma.a, k1.dsigma.b, h * k1.dsigma.coefficient);
    }
  }
  next.time = state_.time + h;

  const double trace = sigma_trace(next.sigma);
  const double norm = next.wbar.norm();
  if (!std::isfinite(norm) || !std::isfinite(trace)) {
    fail(Termination::Diverged, "non-finite state at t=" + std::to_string(next.time));
    return false;
  }
  if (norm > kDivergenceBound || trace > kDivergenceBound) {
    fail(Termination::Diverged, "state norm exceeded 1e12 at t=" + std::to_string(next.time));
    return false;
  }
  state_ = std::move(next);
  return true;
}

bool FlowStepper::advance_unit() {
  if (!running_) return false;
  const int n = config_.substeps_per_unit();
  const double h = config_.dt;
  const double start = state_.time;
  for (int i = 0; i < n; ++i) {
    try {
      if (!substep(h)) return false;
    } catch (const NonConvergenceError& e) {
      fail(Termination::SolverFailure, e.what());
      return false;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFinite) throw;
      fail(Termination::Diverged, e.what());
      return false;
    }
  }
  // keep integer times exact for reporting
  state_.time = std::round(start + 1.0);
  return true;
}

namespace {

TrajectoryRow make_row(const LossSpec& spec, const RodState& s, const Vec& delta) {
  TrajectoryRow r;
  r.time = s.time;
  r.loss_center = loss_value(spec, s.wbar);
  r.loss_edge_plus = loss_value(spec, s.wbar + delta);
  r.loss_edge_minus = loss_value(spec, s.wbar - delta);
  r.delta_norm = delta.norm();
  return r;
}

Trajectory integrate(const LossSpec& spec, FlowKind kind, const RodState& state0, const FlowConfig& config,
                     const RecordOptions& options) {
  config.validate();
  FlowStepper stepper(spec, kind, config, state0);
  Trajectory traj;
  const auto units = static_cast<long>(std::ceil(config.horizon - 1e-9));
  double sharp = std::numeric_limits<double>::quiet_NaN();
  Vec warm;
  auto record = [&](long index) {
    const RodState& s = stepper.state();
    TrajectoryRow row = make_row(spec, s, stepper.delta());
    if (options.sharpness_every > 0 && index % options.sharpness_every == 0) {
      const SharpnessResult r = sharpness_pair(spec, s.wbar, options.spectral, warm.size() ? &warm : nullptr);
      sharp = r.value;
      warm = r.vector;
    }
    row.sharpness_center = sharp;
    traj.rows.push_back(row);
    if (options.keep_states) traj.states.push_back(s);
  };
  record(0);
  for (long u = 1; u <= units; ++u) {
    if (!stepper.advance_unit()) break;
    record(u);
  }
  traj.final_state = stepper.state();
  traj.termination = stepper.termination();
  traj.detail = stepper.detail();
  return traj;
}

}  // namespace

Trajectory gradient_flow_integrate(const LossSpec& spec, const Weights& w0, const FlowConfig& config,
                                   const RecordOptions& options) {
  RodState s0{w0, LowRankSigma(static_cast<std::size_t>(w0.size()), config.rank), 0.0};
  return integrate(spec, FlowKind::Gradient, s0, config, options);
}

Trajectory rodflow_integrate(const LossSpec& spec, const RodState& state0, const FlowConfig& config,
                             const RecordOptions& options) {
  return integrate(spec, FlowKind::Rod, state0, config, options);
}

Trajectory fo_rodflow_integrate(const LossSpec& spec, const RodState& state0, const FlowConfig& config,
                                const RecordOptions& options) {
  return integrate(spec, FlowKind::FirstOrderRod, state0, config, options);
}

}  // namespace rodflow
