#include "rodflow/oracles.hpp"

#include "rodflow/error.hpp"

#include <algorithm>
#include <cmath>

namespace rodflow {

namespace {

void check_positive(double eta, double S) {
  require(std::isfinite(eta) && eta > 0.0, ErrorCode::InvalidArgument, "oracle: eta must be positive");
  require(std::isfinite(S) && S > 0.0, ErrorCode::InvalidArgument, "oracle: S must be positive");
}

constexpr double kMarginalTol = 1e-12;

Stability classify(double derivative, double scale) {
  if (std::abs(derivative) <= kMarginalTol * std::max(1.0, scale)) return Stability::Marginal;
  return derivative < 0.0 ? Stability::Stable : Stability::Unstable;
}

}  // namespace

double quadratic_modified_rate(double eta, double S) {
  check_positive(eta, S);
  if (eta * S >= 1.0) {
    throw Error(ErrorCode::DomainError,
                "quadratic_modified_rate: eta*S >= 1, iterates alternate in sign and no real flow interpolates them");
  }
  return std::log1p(-eta * S);
}

double quadratic_sigma_rate(double eta, double S) {
  check_positive(eta, S);
  return 0.5 * eta * eta * S * S - 2.0;
}

Mat flat_steady_sigma(double eta, const Vec& b) {
  require(eta > 0.0, ErrorCode::InvalidArgument, "flat_steady_sigma: eta must be positive");
  return 0.25 * eta * eta * b * b.transpose();
}

double quartic_sigma_rhs(double eta, double S, double Q, double sigma) {
  const double m = S + Q * sigma;
  return sigma * (0.5 * eta * eta * m * m - 2.0);
}

double quartic_sigma_rhs_derivative(double eta, double S, double Q, double sigma) {
  const double m = S + Q * sigma;
  return 0.5 * eta * eta * m * m - 2.0 + eta * eta * Q * sigma * m;
}

std::string_view stability_name(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Unstable: return "unstable";
    case Stability::Marginal: return "marginal";
  }
  return "unknown";
}

std::string_view quartic_case_name(QuarticCase c) {
  switch (c) {
    case QuarticCase::Case1: return "case1";
    case QuarticCase::Case2: return "case2";
    case QuarticCase::Case3: return "case3";
    case QuarticCase::Case4: return "case4";
    case QuarticCase::Boundary: return "boundary";
  }
  return "unknown";
}

FixedPointReport quartic_fixed_points(double eta, double S, double Q) {
  check_positive(eta, S);
  require(std::isfinite(Q) && Q != 0.0, ErrorCode::InvalidArgument, "quartic_fixed_points: Q must be non-zero");
  FixedPointReport rep;
  const double d0 = quadratic_sigma_rate(eta, S);
  rep.points.push_back({0.0, classify(d0, 2.0), d0});
  for (double sign : {-1.0, 1.0}) {
    const double root = -(S + sign * 2.0 / eta) / Q;
    if (!(root > 0.0)) continue;
    // 2 eta (2/eta +- S)
    const double d = 2.0 * eta * (2.0 / eta + sign * S);
    rep.points.push_back({root, classify(d, 4.0 + 2.0 * eta * S), d});
  }
  std::sort(rep.points.begin(), rep.points.end(), [](const FixedPoint& a, const FixedPoint& b) { return a.sigma < b.sigma; });

  const double gap = eta * S - 2.0;
  if (std::abs(gap) <= kMarginalTol * 2.0) rep.case_id = QuarticCase::Boundary;
  else if (gap < 0.0) rep.case_id = Q > 0.0 ? QuarticCase::Case1 : QuarticCase::Case3;
  else rep.case_id = Q > 0.0 ? QuarticCase::Case2 : QuarticCase::Case4;
  return rep;
}

std::string_view quartic_fate_name(QuarticFate f) {
  switch (f) {
    case QuarticFate::Stationary: return "stationary";
    case QuarticFate::Converges: return "converges";
    case QuarticFate::Diverges: return "diverges";
  }
  return "unknown";
}

QuarticPrediction predict_quartic_fate(double eta, double S, double Q, double sigma0) {
  require(sigma0 >= 0.0 && std::isfinite(sigma0), ErrorCode::InvalidArgument, "predict_quartic_fate: bad sigma0");
  const FixedPointReport rep = quartic_fixed_points(eta, S, Q);
  for (const FixedPoint& fp : rep.points)
    if (fp.sigma == sigma0) return {QuarticFate::Stationary, sigma0};
  const double f = quartic_sigma_rhs(eta, S, Q, sigma0);
  if (f == 0.0) return {QuarticFate::Stationary, sigma0};
  if (f > 0.0) {
    for (const FixedPoint& fp : rep.points)
      if (fp.sigma > sigma0) return {QuarticFate::Converges, fp.sigma};
    return {QuarticFate::Diverges, 0.0};
  }
  double below = 0.0;
  for (const FixedPoint& fp : rep.points)
    if (fp.sigma < sigma0) below = fp.sigma;
  return {QuarticFate::Converges, below};
}

Quartic1D quartic_from_main_text(double S, double Q_main) { return Quartic1D(S, -Q_main); }

}  // namespace rodflow
