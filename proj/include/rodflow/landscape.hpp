#pragma once

#include "rodflow/linalg.hpp"
#include "rodflow/mlp.hpp"

#include <memory>
#include <string_view>
#include <variant>

namespace rodflow {

// L(w) = -b.w, so descent moves along +b
class LinearLoss {
 public:
  explicit LinearLoss(Vec b);
  const Vec& b() const { return b_; }

 private:
  Vec b_;
};

// L(w) = S w^2 / 2
class Quadratic1D {
 public:
  explicit Quadratic1D(double curvature);
  double curvature() const { return s_; }

 private:
  double s_;
};

// L(w) = w.H w / 2
class QuadraticND {
 public:
  explicit QuadraticND(Mat hessian);
  const Mat& hessian() const { return h_; }

 private:
  Mat h_;
};

// L(w) = S w^2 / 2 + Q w^4 / 4. Q < 0 is the self-stabilizing sign.
class Quartic1D {
 public:
  Quartic1D(double curvature, double quartic);
  double curvature() const { return s_; }
  double quartic() const { return q_; }

 private:
  double s_;
  double q_;
};

// L(x, y) = sqrt(1 + x^2 y^2)
struct Sqrt2D {};

class TinyMlp {
 public:
  explicit TinyMlp(std::shared_ptr<const TinyMlpModel> model);
  const TinyMlpModel& model() const { return *model_; }

 private:
  std::shared_ptr<const TinyMlpModel> model_;
};

using LossSpec = std::variant<LinearLoss, Quadratic1D, QuadraticND, Quartic1D, Sqrt2D, TinyMlp>;

std::size_t dimension(const LossSpec& spec);
std::string_view variant_name(const LossSpec& spec);

double loss_value(const LossSpec& spec, const Weights& w);
Weights loss_grad(const LossSpec& spec, const Weights& w);
Weights loss_hvp(const LossSpec& spec, const Weights& w, const Weights& v);
// Gradient of d.H(w)d, i.e. the third derivative contracted twice with d.
Weights loss_third_contract(const LossSpec& spec, const Weights& w, const Weights& d);

// Finite-difference step for the MLP third contraction.
double third_contract_step(const Weights& w, const Weights& d);

}  // namespace rodflow
