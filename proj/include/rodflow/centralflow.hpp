#pragma once

#include "rodflow/flows.hpp"
#include "rodflow/spectral.hpp"

#include <string>

namespace rodflow {

struct CriticalSubspace {
  Mat basis;    // p x k, orthonormal
  Vec lambdas;  // descending
  void validate() const;
};

CriticalSubspace critical_subspace(const LossSpec& spec, const Weights& w, std::size_t k,
                                   const SpectralOptions& options = {}, const CriticalSubspace* warm = nullptr);

// Lambda = U^T (2/eta - H) U
struct Margin {
  Mat matrix;
};

// From the stored eigenvalues: diag(2/eta - lambda_i).
Margin build_margin(const CriticalSubspace& subspace, double eta);
// From Hessian-vector products at w; valid for a stale basis too.
Margin build_margin(const LossSpec& spec, const Weights& w, const CriticalSubspace& subspace, double eta);

// S[Omega]_ab = sum_ij S_(ab),(ij) Omega_ij with S_(ab),(ij) = <g_ab, g_ij> / 2
// and g_ij = D3L[u_i, u_j]. Row-major vec: index a*k + b.
struct SharpnessOperator {
  Mat matrix;  // k^2 x k^2
  std::size_t k = 0;
  bool clamped = false;  // negative eigenvalues were removed

  Mat apply(const Mat& omega) const;
};

// Contractions g_ij = D3L[u_i, u_j] for i <= j via polarization.
std::vector<std::vector<Vec>> third_contractions(const LossSpec& spec, const Weights& w, const Mat& basis);

SharpnessOperator build_sharpness_operator(const LossSpec& spec, const Weights& w, const CriticalSubspace& subspace);
SharpnessOperator sharpness_operator_from_contractions(const std::vector<std::vector<Vec>>& g);

struct SdcpResiduals {
  double min_eig_omega = 0.0;
  double min_eig_slack = 0.0;  // Lambda + S[Omega]
  double complementarity = 0.0;
};

struct Covariance {
  Mat omega;
  SdcpResiduals residuals;
  int iterations = 0;
};

class SdcpError : public NonConvergenceError {
 public:
  SdcpError(const std::string& message, SdcpResiduals residuals, int iterations);
  const SdcpResiduals& residuals() const noexcept { return residuals_; }

 private:
  SdcpResiduals residuals_;
};

SdcpResiduals sdcp_residuals(const Margin& margin, const SharpnessOperator& op, const Mat& omega);

// Projected gradient on min <Omega, S Omega>/2 + <Lambda, Omega> over Omega PSD.
Covariance solve_sdcp(const Margin& margin, const SharpnessOperator& op, double tol = 1e-10, int max_iter = 10000,
                      const Mat* warm = nullptr);

Weights centralflow_rhs(const LossSpec& spec, const Weights& wbar, const Covariance& cov,
                        const CriticalSubspace& subspace, double eta);

struct CentralFlowOptions {
  std::size_t k = 1;
  int eig_cadence = 10;  // subspace refresh, in time units
  double sdcp_tol = 1e-10;
  int sdcp_max_iter = 10000;
  SpectralOptions spectral;
};

class CentralFlowStepper {
 public:
  CentralFlowStepper(LossSpec spec, FlowConfig config, CentralFlowOptions options, Weights w0);

  bool advance_unit();
  const Weights& wbar() const { return wbar_; }
  double time() const { return time_; }
  // Solve at the current state: Omega, margin; refreshes nothing.
  Covariance covariance_now() const;
  double margin_min_now() const;
  // sqrt(omega_max) U q_max, sign-aligned with the previous call
  Vec delta();
  const CriticalSubspace& subspace() const { return subspace_; }
  Termination termination() const { return termination_; }
  const std::string& detail() const { return detail_; }
  bool running() const { return running_; }

 private:
  Weights rhs(const Weights& w);
  void refresh_subspace();
  void fail(Termination t, std::string detail);

  LossSpec spec_;
  FlowConfig config_;
  CentralFlowOptions options_;
  Weights wbar_;
  double time_ = 0.0;
  long units_ = 0;
  CriticalSubspace subspace_;
  Mat last_omega_;
  Vec last_delta_;
  Termination termination_ = Termination::Completed;
  std::string detail_;
  bool running_ = true;
};

struct CentralFlowTrajectory {
  Trajectory base;
  std::vector<double> omega_trace;
  std::vector<double> margin_min;
};

CentralFlowTrajectory centralflow_integrate(const LossSpec& spec, const Weights& w0, const FlowConfig& config,
                                            const CentralFlowOptions& options = {},
                                            const RecordOptions& record = {});

}  // namespace rodflow
