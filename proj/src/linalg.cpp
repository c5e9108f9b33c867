#include "rodflow/linalg.hpp"

#include "rodflow/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace rodflow {

namespace {

double off_diagonal_norm(const Mat& a) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

SymmetricEigen jacobi_eigen(const Mat& input, double rel_tol, int max_sweeps) {
  require(input.rows() == input.cols(), ErrorCode::DimensionMismatch, "jacobi_eigen: matrix not square");
  require(all_finite(input), ErrorCode::NonFinite, "jacobi_eigen: non-finite entry");
  const Eigen::Index n = input.rows();
  Mat a = 0.5 * (input + input.transpose());
  Mat v = Mat::Identity(n, n);
  const double scale = a.norm();
  int sweep = 0;
  if (scale > 0.0) {
    for (; sweep < max_sweeps; ++sweep) {
      if (off_diagonal_norm(a) <= rel_tol * scale) break;
      for (Eigen::Index p = 0; p < n - 1; ++p) {
        for (Eigen::Index q = p + 1; q < n; ++q) {
          const double apq = a(p, q);
          if (apq == 0.0) continue;
          const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
          const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
          const double c = 1.0 / std::sqrt(t * t + 1.0);
          const double s = t * c;
          for (Eigen::Index k = 0; k < n; ++k) {
            const double akp = a(k, p), akq = a(k, q);
            a(k, p) = c * akp - s * akq;
            a(k, q) = s * akp + c * akq;
          }
          for (Eigen::Index k = 0; k < n; ++k) {
            const double apk = a(p, k), aqk = a(q, k);
            a(p, k) = c * apk - s * aqk;
            a(q, k) = s * apk + c * aqk;
          }
          a(p, q) = a(q, p) = 0.0;
          for (Eigen::Index k = 0; k < n; ++k) {
            const double vkp = v(k, p), vkq = v(k, q);
            v(k, p) = c * vkp - s * vkq;
            v(k, q) = s * vkp + c * vkq;
          }
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }
  out.sweeps = sweep;
  return out;
}

Mat orthonormalize_columns(const Mat& v, double drop_tol) {
  Mat q(v.rows(), v.cols());
  Eigen::Index kept = 0;
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    Vec x = v.col(j);
    const double original = x.norm();
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index i = 0; i < kept; ++i) x -= q.col(i).dot(x) * q.col(i);
    const double nx = x.norm();
    if (nx <= drop_tol * std::max(original, 1.0) || nx == 0.0) continue;
    q.col(kept++) = x / nx;
  }
  return q.leftCols(kept);
}

Mat project_psd(const Mat& a) {
  const SymmetricEigen e = jacobi_eigen(a);
  const Vec clamped = e.values.cwiseMax(0.0);
  return e.vectors * clamped.asDiagonal() * e.vectors.transpose();
}

double min_eigenvalue(const Mat& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  return jacobi_eigen(symmetric).values.minCoeff();
}

TopPair dense_top_pair(const Mat& symmetric) {
  TopPair out;
  out.vector = Vec::Zero(symmetric.rows());
  if (symmetric.size() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Mat> solver(symmetric);
  require(solver.info() == Eigen::Success, ErrorCode::NonConvergence, "dense_top_pair: eigensolver failed");
  const Eigen::Index last = symmetric.rows() - 1;
  out.value = std::max(0.0, solver.eigenvalues()(last));
  out.vector = solver.eigenvectors().col(last);
  return out;
}

bool all_finite(const Vec& v) { return v.allFinite(); }
bool all_finite(const Mat& m) { return m.allFinite(); }

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

void align_sign(Vec& v, const Vec& reference) {
  if (reference.size() == v.size() && v.dot(reference) < 0.0) v = -v;
}

}  // namespace rodflow
