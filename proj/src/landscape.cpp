#include "rodflow/landscape.hpp"

#include "rodflow/error.hpp"

#include <algorithm>
#include <cmath>

namespace rodflow {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_point(const LossSpec& spec, const Weights& w, std::string_view what) {
  require_same_dim(dimension(spec), static_cast<std::size_t>(w.size()), what);
  require(all_finite(w), ErrorCode::NonFinite, std::string(what) + ": non-finite input");
}

}  // namespace

LinearLoss::LinearLoss(Vec b) : b_(std::move(b)) {
  require(b_.size() > 0, ErrorCode::InvalidArgument, "linear loss: empty b");
  require(all_finite(b_), ErrorCode::NonFinite, "linear loss: non-finite b");
}

Quadratic1D::Quadratic1D(double curvature) : s_(curvature) {
  require(std::isfinite(s_) && s_ > 0.0, ErrorCode::InvalidArgument, "quadratic1d: curvature must be positive");
}

QuadraticND::QuadraticND(Mat hessian) : h_(std::move(hessian)) {
  require(h_.rows() == h_.cols() && h_.rows() > 0, ErrorCode::DimensionMismatch, "quadratic: hessian not square");
  require(all_finite(h_), ErrorCode::NonFinite, "quadratic: non-finite hessian");
  const double asym = (h_ - h_.transpose()).cwiseAbs().maxCoeff();
  require(asym <= 1e-12 * std::max(1.0, h_.cwiseAbs().maxCoeff()), ErrorCode::InvalidArgument,
          "quadratic: hessian not symmetric");
}

Quartic1D::Quartic1D(double curvature, double quartic) : s_(curvature), q_(quartic) {
  require(std::isfinite(s_) && std::isfinite(q_), ErrorCode::NonFinite, "quartic1d: non-finite coefficient");
  require(s_ >= 0.0, ErrorCode::InvalidArgument, "quartic1d: curvature must be non-negative");
}

TinyMlp::TinyMlp(std::shared_ptr<const TinyMlpModel> model) : model_(std::move(model)) {
  require(model_ != nullptr, ErrorCode::InvalidArgument, "tiny mlp: model missing");
}

std::size_t dimension(const LossSpec& spec) {
  return std::visit(Overloaded{
                        [](const LinearLoss& l) { return static_cast<std::size_t>(l.b().size()); },
                        [](const Quadratic1D&) { return std::size_t{1}; },
                        [](const QuadraticND& q) { return static_cast<std::size_t>(q.hessian().rows()); },
                        [](const Quartic1D&) { return std::size_t{1}; },
                        [](const Sqrt2D&) { return std::size_t{2}; },
                        [](const TinyMlp& m) { return m.model().dimension(); },
                    },
                    spec);
}

std::string_view variant_name(const LossSpec& spec) {
  return std::visit(Overloaded{
                        [](const LinearLoss&) { return std::string_view("linear"); },
                        [](const Quadratic1D&) { return std::string_view("quadratic1d"); },
                        [](const QuadraticND&) { return std::string_view("quadratic"); },
                        [](const Quartic1D&) { return std::string_view("quartic1d"); },
                        [](const Sqrt2D&) { return std::string_view("sqrt2d"); },
                        [](const TinyMlp&) { return std::string_view("mlp"); },
                    },
                    spec);
}

double loss_value(const LossSpec& spec, const Weights& w) {
  check_point(spec, w, "loss_value");
  return std::visit(Overloaded{
                        [&](const LinearLoss& l) { return -l.b().dot(w); },
                        [&](const Quadratic1D& q) { return 0.5 * q.curvature() * w(0) * w(0); },
                        [&](const QuadraticND& q) { return 0.5 * w.dot(q.hessian() * w); },
                        [&](const Quartic1D& q) {
                          const double x2 = w(0) * w(0);
                          return 0.5 * q.curvature() * x2 + 0.25 * q.quartic() * x2 * x2;
                        },
                        [&](const Sqrt2D&) {
                          const double u = w(0) * w(1);
                          return std::sqrt(1.0 + u * u);
                        },
                        [&](const TinyMlp& m) { return m.model().loss(w); },
                    },
                    spec);
}

Weights loss_grad(const LossSpec& spec, const Weights& w) {
  check_point(spec, w, "loss_grad");
  Weights g = std::visit(Overloaded{
                        [&](const LinearLoss& l) -> Weights { return -l.b(); },
                        [&](const Quadratic1D& q) -> Weights { return q.curvature() * w; },
                        [&](const QuadraticND& q) -> Weights { return q.hessian() * w; },
                        [&](const Quartic1D& q) -> Weights {
                          const double x = w(0);
                          return Weights::Constant(1, q.curvature() * x + q.quartic() * x * x * x);
                        },
                        [&](const Sqrt2D&) -> Weights {
                          const double x = w(0), y = w(1), u = x * y;
                          const double r = std::sqrt(1.0 + u * u);
                          Weights g(2);
                          g << u / r * y, u / r * x;
                          return g;
                        },
                        [&](const TinyMlp& m) -> Weights { return m.model().gradient(w); },
                    },
                    spec);
  require(all_finite(g), ErrorCode::NonFinite, "loss_grad: non-finite gradient");
  return g;
}

Weights loss_hvp(const LossSpec& spec, const Weights& w, const Weights& v) {
  check_point(spec, w, "loss_hvp");
  require_same_dim(dimension(spec), static_cast<std::size_t>(v.size()), "loss_hvp direction");
  require(all_finite(v), ErrorCode::NonFinite, "loss_hvp: non-finite direction");
  return std::visit(Overloaded{
                        [&](const LinearLoss&) -> Weights { return Weights::Zero(v.size()); },
                        [&](const Quadratic1D& q) -> Weights { return q.curvature() * v; },
                        [&](const QuadraticND& q) -> Weights { return q.hessian() * v; },
                        [&](const Quartic1D& q) -> Weights {
                          return (q.curvature() + 3.0 * q.quartic() * w(0) * w(0)) * v;
                        },
                        [&](const Sqrt2D&) -> Weights {
                          const double x = w(0), y = w(1), u = x * y;
                          const double r = std::sqrt(1.0 + u * u);
                          // H = grad(u) grad(u)^T / r^3 + (u / r) [[0,1],[1,0]]
                          const double a = y * v(0) + x * v(1);
                          Weights out(2);
                          out << a * y / (r * r * r) + u / r * v(1), a * x / (r * r * r) + u / r * v(0);
                          return out;
                        },
                        [&](const TinyMlp& m) -> Weights { return m.model().hvp(w, v); },
                    },
                    spec);
}

double third_contract_step(const Weights& w, const Weights& d) {
  return 1e-4 * (1.0 + inf_norm(w)) / std::max(inf_norm(d), 1e-12);
}

Weights loss_third_contract(const LossSpec& spec, const Weights& w, const Weights& d) {
  check_point(spec, w, "loss_third_contract");
  require_same_dim(dimension(spec), static_cast<std::size_t>(d.size()), "loss_third_contract direction");
  require(all_finite(d), ErrorCode::NonFinite, "loss_third_contract: non-finite direction");
  return std::visit(Overloaded{
                        [&](const LinearLoss&) -> Weights { return Weights::Zero(d.size()); },
                        [&](const Quadratic1D&) -> Weights { return Weights::Zero(1); },
                        [&](const QuadraticND&) -> Weights { return Weights::Zero(d.size()); },
                        [&](const Quartic1D& q) -> Weights {
                          return Weights::Constant(1, 6.0 * q.quartic() * w(0) * d(0) * d(0));
                        },
                        [&](const Sqrt2D&) -> Weights {
                          const double x = w(0), y = w(1), u = x * y;
                          const double r2 = 1.0 + u * u;
                          const double r = std::sqrt(r2);
                          const double r3 = r * r2, r5 = r3 * r2;
                          const double dx = d(0), dy = d(1);
                          const double a = y * dx + x * dy;
                          // d/dw of [a^2 / r^3 + 2 u dx dy / r]
                          Weights out(2);
                          out << 2.0 * a * dy / r3 - 3.0 * u * a * a / r5 * y + 2.0 * dx * dy / r3 * y,
                              2.0 * a * dx / r3 - 3.0 * u * a * a / r5 * x + 2.0 * dx * dy / r3 * x;
                          return out;
                        },
                        [&](const TinyMlp& m) -> Weights {
                          const double h = third_contract_step(w, d);
                          const Weights plus = m.model().hvp(w + h * d, d);
                          const Weights minus = m.model().hvp(w - h * d, d);
                          return (plus - minus) / (2.0 * h);
                        },
                    },
                    spec);
}

}  // namespace rodflow
