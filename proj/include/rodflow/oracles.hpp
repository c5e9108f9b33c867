#pragma once

// Closed-form results for the toy landscapes. Quartic convention:
// L = S w^2 / 2 + Q w^4 / 4, so Q < 0 is self-stabilizing.

#include "rodflow/landscape.hpp"

#include <string_view>
#include <vector>

namespace rodflow {

// log(1 - eta S): the continuous rate whose flow hits GD iterates on a quadratic.
double quadratic_modified_rate(double eta, double S);
// eta^2 S^2 / 2 - 2
double quadratic_sigma_rate(double eta, double S);
Mat flat_steady_sigma(double eta, const Vec& b);

double quartic_sigma_rhs(double eta, double S, double Q, double sigma);
double quartic_sigma_rhs_derivative(double eta, double S, double Q, double sigma);

enum class Stability { Stable, Unstable, Marginal };
std::string_view stability_name(Stability s);

enum class QuarticCase { Case1, Case2, Case3, Case4, Boundary };
std::string_view quartic_case_name(QuarticCase c);

struct FixedPoint {
  double sigma = 0.0;
  Stability stability = Stability::Marginal;
  double derivative = 0.0;
};

struct FixedPointReport {
  std::vector<FixedPoint> points;  // ascending sigma
  QuarticCase case_id = QuarticCase::Boundary;
};

FixedPointReport quartic_fixed_points(double eta, double S, double Q);

// Where the scalar sigma ODE goes from sigma0 >= 0.
enum class QuarticFate { Stationary, Converges, Diverges };
std::string_view quartic_fate_name(QuarticFate f);

struct QuarticPrediction {
  QuarticFate fate = QuarticFate::Stationary;
  double limit = 0.0;  // meaningful unless Diverges
};

QuarticPrediction predict_quartic_fate(double eta, double S, double Q, double sigma0);

// L = S w^2/2 - Q w^4/4 written in the signed convention.
Quartic1D quartic_from_main_text(double S, double Q_main);

}  // namespace rodflow
