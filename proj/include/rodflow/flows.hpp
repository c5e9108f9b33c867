#pragma once

#include "rodflow/landscape.hpp"
#include "rodflow/lowrank.hpp"
#include "rodflow/spectral.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rodflow {

enum class Integrator { Euler, Rk4 };

struct FlowConfig {
  double eta = 0.0;
  double dt = 0.01;  // must divide one time unit evenly
  Integrator integrator = Integrator::Rk4;
  double horizon = 1.0;
  std::size_t dense_threshold = 64;
  std::size_t rank = 3;

  void validate() const;
  int substeps_per_unit() const;
};

struct DenseSigma {
  Mat matrix;
};

using SigmaRep = std::variant<DenseSigma, LowRankSigma>;

double sigma_trace(const SigmaRep& sigma);
std::size_t sigma_dim(const SigmaRep& sigma);
Vec sigma_delta(const SigmaRep& sigma, const Vec* reference = nullptr);
double sigma_eigen_ratio(const SigmaRep& sigma);
double sigma_min_eigenvalue(const SigmaRep& sigma);
// delta delta^T, dense when p <= dense_threshold
SigmaRep sigma_from_delta(const Vec& delta, std::size_t dense_threshold = 64, std::size_t rank = 3);

struct RodState {
  Weights wbar;
  SigmaRep sigma;
  double time = 0.0;
};

RodState make_rod_state(const Weights& wbar, const Vec& delta, const FlowConfig& config);

Weights gd_step(const LossSpec& spec, const Weights& w, double eta);

struct RodCoordinates {
  Weights wbar;
  Weights delta;
};
RodCoordinates to_rod(const Weights& w_t, const Weights& w_next);

struct RodDifference {
  Weights wbar;
  Mat outer;  // next delta delta^T
};
RodDifference rod_difference_step(const LossSpec& spec, const Weights& wbar, const Weights& delta, double eta);

// dSigma = coefficient (a a^T + b b^T) - 2 Sigma, kept factored so the
// low-rank path never forms a p x p matrix.
struct SigmaDrift {
  Vec a;
  Vec b;
  double coefficient = 0.0;
  Mat dense(const Mat& sigma) const;
};

struct RodDerivative {
  Weights dwbar;
  SigmaDrift dsigma;
};

Weights gradient_flow_rhs(const LossSpec& spec, const Weights& w, double eta);
RodDerivative rodflow_rhs_at(const LossSpec& spec, const Weights& wbar, const Vec& delta, double eta);
RodDerivative fo_rodflow_rhs_at(const LossSpec& spec, const Weights& wbar, const Vec& delta, double eta);
RodDerivative rodflow_rhs(const LossSpec& spec, const RodState& state, double eta);
RodDerivative fo_rodflow_rhs(const LossSpec& spec, const RodState& state, double eta);

enum class FlowKind { Gradient, Rod, FirstOrderRod };
std::string_view flow_name(FlowKind kind);

enum class Termination { Completed, Diverged, SolverFailure };
std::string_view termination_name(Termination t);

inline constexpr double kDivergenceBound = 1e12;

// Advances a flow by whole time units. Gradient flow ignores sigma.
class FlowStepper {
 public:
  FlowStepper(LossSpec spec, FlowKind kind, FlowConfig config, RodState initial);

  // One time unit; false once the run has terminated.
  bool advance_unit();

  const RodState& state() const { return state_; }
  // Principal delta, sign-aligned with the previous call's result.
  Vec delta();
  FlowKind kind() const { return kind_; }
  Termination termination() const { return termination_; }
  const std::string& detail() const { return detail_; }
  bool running() const { return running_; }

 private:
  bool substep(double h);
  void fail(Termination t, std::string detail);

  LossSpec spec_;
  FlowKind kind_;
  FlowConfig config_;
  RodState state_;
  Vec last_delta_;
  Termination termination_ = Termination::Completed;
  std::string detail_;
  bool running_ = true;
};

struct RecordOptions {
  int sharpness_every = 0;  // 0: never computed (NaN in output)
  SpectralOptions spectral;
  bool keep_states = true;
};

struct TrajectoryRow {
  double time = 0.0;
  double loss_center = 0.0;
  double loss_edge_plus = 0.0;
  double loss_edge_minus = 0.0;
  double sharpness_center = 0.0;
  double delta_norm = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryRow> rows;
  std::vector<RodState> states;  // one per row when kept
  RodState final_state;          // last finite state
  Termination termination = Termination::Completed;
  std::string detail;
};

Trajectory gradient_flow_integrate(const LossSpec& spec, const Weights& w0, const FlowConfig& config,
                                   const RecordOptions& options = {});
Trajectory rodflow_integrate(const LossSpec& spec, const RodState& state0, const FlowConfig& config,
                             const RecordOptions& options = {});
Trajectory fo_rodflow_integrate(const LossSpec& spec, const RodState& state0, const FlowConfig& config,
                                const RecordOptions& options = {});

// One substep of gradient flow.
Weights gradient_flow_step(const LossSpec& spec, const Weights& w, double eta, double dt, Integrator integrator);

}  // namespace rodflow
