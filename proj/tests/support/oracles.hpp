#pragma once
// Test-only reference implementations. Nothing here calls the derivative
// oracles it is used to check, except where a check is explicitly built one
// level up (e.g. finite differences of the library gradient to check the HVP).

#include <rodflow/dataset.hpp>
#include <rodflow/flows.hpp>
#include <rodflow/landscape.hpp>
#include <rodflow/mlp.hpp>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

namespace testing {

using rodflow::LossSpec;
using rodflow::Mat;
using rodflow::Vec;
using rodflow::Weights;

inline Vec random_vec(std::size_t p, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vec v(static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = n(rng);
  return v;
}

inline double rel_err(const Vec& a, const Vec& b, double floor = 1e-12) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

inline double rel_err(double a, double b, double floor = 1e-300) {
  return std::abs(a - b) / std::max(std::abs(b), floor);
}

inline Vec fd_gradient(const LossSpec& spec, const Weights& w, double h) {
  Vec g(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    Weights a = w, b = w;
    a(i) += h;
    b(i) -= h;
    g(i) = (rodflow::loss_value(spec, a) - rodflow::loss_value(spec, b)) / (2.0 * h);
  }
  return g;
}

inline Vec fd_hvp(const LossSpec& spec, const Weights& w, const Vec& v, double h = 1e-4) {
  return (rodflow::loss_grad(spec, w + h * v) - rodflow::loss_grad(spec, w - h * v)) / (2.0 * h);
}

// Gradient of phi(w) = d^T H(w) d by central differences, one coordinate at a time.
inline Vec fd_third_by_coordinates(const LossSpec& spec, const Weights& w, const Vec& d, double h) {
  Vec g(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    Weights a = w, b = w;
    a(i) += h;
    b(i) -= h;
    g(i) = (d.dot(rodflow::loss_hvp(spec, a, d)) - d.dot(rodflow::loss_hvp(spec, b, d))) / (2.0 * h);
  }
  return g;
}

inline Mat dense_hessian(const LossSpec& spec, const Weights& w) {
  const Eigen::Index p = w.size();
  Mat h(p, p);
  for (Eigen::Index j = 0; j < p; ++j) h.col(j) = rodflow::loss_hvp(spec, w, Vec::Unit(p, j));
  return 0.5 * (h + h.transpose());
}

inline Vec dense_eigenvalues_desc(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  return es.eigenvalues().reverse();
}

// Raw GD, then the center/half-difference of each consecutive pair.
struct GdRod {
  std::vector<Vec> wbar;
  std::vector<Mat> outer;
};

inline GdRod gd_rod_sequence(const LossSpec& spec, const Weights& w0, double eta, int steps) {
  std::vector<Vec> w = {w0};
  for (int t = 0; t <= steps; ++t) w.push_back(w.back() - eta * rodflow::loss_grad(spec, w.back()));
  GdRod r;
  for (int t = 0; t <= steps; ++t) {
    const Vec c = 0.5 * (w[t] + w[t + 1]);
    const Vec d = 0.5 * (w[t + 1] - w[t]);
    r.wbar.push_back(c);
    r.outer.push_back(d * d.transpose());
  }
  return r;
}

// Independent forward pass of the MLP loss in plain Eigen.
inline double reference_mlp_loss(const rodflow::MlpArchitecture& arch, const rodflow::Dataset& data,
                                 const Weights& w, rodflow::MseReduction reduction) {
  Mat x = data.inputs;
  Eigen::Index off = 0;
  const std::size_t nl = arch.layers.size() - 1;
  for (std::size_t l = 0; l < nl; ++l) {
    const auto fi = static_cast<Eigen::Index>(arch.layers[l]);
    const auto fo = static_cast<Eigen::Index>(arch.layers[l + 1]);
    Mat W(fi, fo);
    for (Eigen::Index i = 0; i < fi; ++i)
      for (Eigen::Index j = 0; j < fo; ++j) W(i, j) = w(off + i * fo + j);
    off += fi * fo;
    const Vec b = w.segment(off, fo);
    off += fo;
    Mat z = x * W;
    z.rowwise() += b.transpose();
    if (l + 1 < nl) {
      if (arch.activation == rodflow::Activation::Silu)
        z = z.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
      else
        z = z.unaryExpr([](double v) { return std::tanh(v); });
    }
    x = z;
  }
  const double sse = (x - data.targets).squaredNorm();
  const double n = static_cast<double>(data.size());
  if (reduction == rodflow::MseReduction::Mean) return sse / (n * static_cast<double>(data.output_dim()));
  return sse / n;
}

struct MlpFixture {
  rodflow::MlpArchitecture arch;
  std::shared_ptr<const rodflow::Dataset> data;
  std::shared_ptr<const rodflow::TinyMlpModel> model;
  LossSpec spec = rodflow::Sqrt2D{};
};

inline MlpFixture make_mlp(std::vector<std::size_t> layers, std::size_t samples = 16, double scale = 1.0,
                           std::uint64_t seed = 0, rodflow::Activation act = rodflow::Activation::Silu,
                           rodflow::MseReduction red = rodflow::MseReduction::Mean) {
  MlpFixture f;
  f.arch.layers = std::move(layers);
  f.arch.activation = act;
  rodflow::TeacherConfig tc;
  tc.samples = samples;
  tc.input_dim = f.arch.layers.front();
  tc.output_dim = f.arch.layers.back();
  tc.target_scale = scale;
  tc.seed = seed;
  f.data = std::make_shared<const rodflow::Dataset>(rodflow::make_teacher_dataset(tc));
  f.model = std::make_shared<const rodflow::TinyMlpModel>(f.arch, f.data, red);
  f.spec = rodflow::TinyMlp(f.model);
  return f;
}

// Dense reference for one decay + injection step of the extent matrix.
inline Mat dense_sigma_step(const Mat& sigma, const Vec& gp, const Vec& gm, double eta, double dt) {
  return (1.0 - 2.0 * dt) * sigma + 0.25 * eta * eta * dt * (gp * gp.transpose() + gm * gm.transpose());
}

}  // namespace testing
