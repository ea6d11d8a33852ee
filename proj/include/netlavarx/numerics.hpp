#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "netlavarx/error.hpp"

namespace netlavarx {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

inline void require_finite(const Matrix& a, const char* what) {
  if (!a.allFinite()) {
    throw Error(ErrorKind::InvalidInput, std::string(what) + " contains non-finite entries");
  }
}

/// Economy SVD restricted to the numerical rank: A = U diag(D) V^T with
/// U (n x r), D (r, descending, strictly positive), V (m x r).
struct Svd {
  Matrix u;
  Vector singular_values;
  Matrix v;
  Index rank = 0;
};

/// Numerical rank threshold. With relative_tolerance <= 0 the default rule
/// sigma > sigma_max * max(n, m) * eps is used; otherwise
/// sigma > sigma_max * relative_tolerance.
inline double rank_threshold(double sigma_max, Index rows, Index cols, double relative_tolerance = 0.0) {
  if (relative_tolerance > 0.0) return sigma_max * relative_tolerance;
  return sigma_max * static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon();
}

inline Svd economy_svd(const Matrix& a, double relative_tolerance = 0.0) {
  require_finite(a, "economy_svd input");
  if (a.rows() < 1 || a.cols() < 1) {
    throw Error(ErrorKind::InvalidInput, "economy_svd requires a non-empty matrix");
  }
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  const double sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;
  const double threshold = rank_threshold(sigma_max, a.rows(), a.cols(), relative_tolerance);
  Index rank = 0;
  if (sigma_max > 0.0) {
    while (rank < sigma.size() && sigma(rank) > threshold) ++rank;
  }
  Svd out;
  out.rank = rank;
  out.u = svd.matrixU().leftCols(rank);
  out.singular_values = sigma.head(rank);
  out.v = svd.matrixV().leftCols(rank);
  return out;
}

struct SymmetricEigen {
  Vector values;   // non-increasing
  Matrix vectors;  // orthonormal columns, sign-normalized
};

/// Flips each column so that its largest-magnitude entry is positive
/// (first index wins among equal magnitudes).
inline void normalize_column_signs(Matrix& vectors) {
  for (Index c = 0; c < vectors.cols(); ++c) {
    Index best = 0;
    double best_abs = -1.0;
    for (Index r = 0; r < vectors.rows(); ++r) {
      const double v = std::abs(vectors(r, c));
      if (v > best_abs) {
        best_abs = v;
        best = r;
      }
    }
    if (vectors.rows() > 0 && vectors(best, c) < 0.0) vectors.col(c) *= -1.0;
  }
}

inline SymmetricEigen sym_eig_desc(const Matrix& s) {
  require_finite(s, "sym_eig_desc input");
  if (s.rows() != s.cols()) {
    throw Error(ErrorKind::InvalidInput, "sym_eig_desc requires a square matrix");
  }
  const double asym = (s - s.transpose()).cwiseAbs().rowwise().sum().maxCoeff();
  const double scale = s.cwiseAbs().rowwise().sum().maxCoeff();
  if (asym > 1e-9 * (1.0 + scale)) {
    throw Error(ErrorKind::InvalidInput, "sym_eig_desc input is not symmetric");
  }
  const Matrix sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::InvalidInput, "symmetric eigendecomposition failed");
  }
  SymmetricEigen out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  normalize_column_signs(out.vectors);
  return out;
}

inline Matrix pinv(const Matrix& a, double relative_tolerance = 0.0) {
  require_finite(a, "pinv input");
  if (a.rows() == 0 || a.cols() == 0) return Matrix::Zero(a.cols(), a.rows());
  const Svd svd = economy_svd(a, relative_tolerance);
  if (svd.rank == 0) return Matrix::Zero(a.cols(), a.rows());
  return svd.v * svd.singular_values.cwiseInverse().asDiagonal() * svd.u.transpose();
}

/// Orthonormal basis for range(a); throws if a is not of full column rank.
inline Matrix orthonormal_basis(const Matrix& a) {
  const Svd svd = economy_svd(a);
  if (svd.rank != a.cols()) {
    throw Error(ErrorKind::InvalidInput, "matrix does not have full column rank");
  }
  return svd.u;
}

/// Columns spanning the orthogonal complement of range(a), from a full SVD.
inline Matrix orthogonal_complement(const Matrix& a) {
  const Index p = a.rows();
  if (a.cols() == 0) return Matrix::Identity(p, p);
  require_finite(a, "orthogonal_complement input");
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU);
  const Vector& sigma = svd.singularValues();
  const double threshold = rank_threshold(sigma.size() ? sigma(0) : 0.0, a.rows(), a.cols());
  Index rank = 0;
  if (sigma.size() && sigma(0) > 0.0) {
    while (rank < sigma.size() && sigma(rank) > threshold) ++rank;
  }
  return svd.matrixU().rightCols(p - rank);
}

/// Sample mean / variance helpers (variance with divisor n - 1).
inline double column_mean(const Eigen::Ref<const Vector>& x) { return x.mean(); }

inline double sample_variance(const Eigen::Ref<const Vector>& x) {
  const double mu = x.mean();
  return (x.array() - mu).square().sum() / static_cast<double>(x.size() - 1);
}

}  // namespace netlavarx
