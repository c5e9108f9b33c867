#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace rodflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Weights = Eigen::VectorXd;

struct SymmetricEigen {
  Vec values;   // descending
  Mat vectors;  // columns match values
  int sweeps = 0;
};

// Cyclic Jacobi for small symmetric matrices. Stops once the off-diagonal
// Frobenius norm is below rel_tol * ||A||_F.
SymmetricEigen jacobi_eigen(const Mat& a, double rel_tol = 1e-14, int max_sweeps = 100);

// Modified Gram-Schmidt with one re-orthogonalization pass. Columns whose
// remaining norm falls below drop_tol are removed.
Mat orthonormalize_columns(const Mat& v, double drop_tol = 1e-14);

// Nearest PSD matrix in Frobenius norm (negative eigenvalues clamped).
Mat project_psd(const Mat& a);

double min_eigenvalue(const Mat& symmetric);

// Top eigenpair of a dense symmetric matrix; eigenvalue clamped at zero.
struct TopPair {
  double value = 0.0;
  Vec vector;
};
TopPair dense_top_pair(const Mat& symmetric);

bool all_finite(const Vec& v);
bool all_finite(const Mat& m);
double inf_norm(const Vec& v);

// Flip v so that it has non-negative inner product with reference.
void align_sign(Vec& v, const Vec& reference);

}  // namespace rodflow
