#pragma once

#include "agfm/rng.hpp"
#include "agfm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace agfm {

inline constexpr std::size_t kSvdOversampling = 8;
inline constexpr std::size_t kSvdPowerIterations = 4;

struct TruncatedSvd {
  std::vector<double> singular_values;  // non-increasing
  Matrix<double> right_vectors;         // cols x k, orthonormal columns
};

namespace detail {

// Orthonormalizes the columns of `q` in place with two passes of classical
// Gram-Schmidt. A column that is numerically dependent on its predecessors
// is zeroed. Only column inner products are used, so permuting the rows of
// `q` permutes the result the same way.
inline void orthonormalize_columns(Matrix<double>& q) {
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    const double before = q.col(j).norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < j; ++i) {
        const double proj = q.col(i).dot(q.col(j));
        q.col(j) -= proj * q.col(i);
      }
    }
    const double after = q.col(j).norm();
    if (before == 0.0 || after <= 1e-10 * before) {
      q.col(j).setZero();
    } else {
      q.col(j) /= after;
    }
  }
}

// One-sided (Hestenes) Jacobi: rotates the columns of `m` until they are
// mutually orthogonal. On exit m = U * diag(sigma) for the left singular
// vectors U of the input, in no particular order.
inline void hestenes_jacobi(Matrix<double>& m) {
  const Eigen::Index cols = m.cols();
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < cols; ++p) {
      for (Eigen::Index q = p + 1; q < cols; ++q) {
        const double alpha = m.col(p).squaredNorm();
        const double beta = m.col(q).squaredNorm();
        const double gamma = m.col(p).dot(m.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        const Vector<double> mp = m.col(p);
        m.col(p) = c * mp - s * m.col(q);
        m.col(q) = s * mp + c * m.col(q);
      }
    }
    if (!rotated) break;
  }
}

// Replaces zero columns of an orthonormal set with unit vectors that
// complete it, so the result is always a full orthonormal frame.
inline void complete_orthonormal(Matrix<double>& v) {
  Eigen::Index candidate = 0;
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    if (v.col(j).squaredNorm() > 0.5) continue;
    while (candidate < v.rows()) {
      Vector<double> e = Vector<double>::Unit(v.rows(), candidate++);
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index i = 0; i < v.cols(); ++i)
          if (i != j && v.col(i).squaredNorm() > 0.5) e -= v.col(i).dot(e) * v.col(i);
      const double norm = e.norm();
      if (norm > 1e-6) {
        v.col(j) = e / norm;
        break;
      }
    }
  }
}

}  // namespace detail

/// Top-k right singular vectors and values by randomized subspace iteration
/// (Gaussian sketch with oversampling 8, 4 power iterations, re-orthonormalized
/// at every pass). Computation is in double regardless of the input type.
///
/// Signs are canonical: the largest-magnitude entry of every right singular
/// vector is positive (first index wins ties).
template <typename T>
TruncatedSvd truncated_svd(const Matrix<T>& x, std::size_t k, std::uint64_t seed) {
  const auto rows = static_cast<std::size_t>(x.rows());
  const auto cols = static_cast<std::size_t>(x.cols());
  if (k < 1 || k > std::min(rows, cols)) {
    throw std::invalid_argument("truncated_svd: k=" + std::to_string(k) +
                                " outside [1, min(rows, cols)=" +
                                std::to_string(std::min(rows, cols)) + "]");
  }
  const Matrix<double> a = x.template cast<double>();
  const auto sketch = static_cast<Eigen::Index>(std::min(k + kSvdOversampling, std::min(rows, cols)));

  Rng rng(seed);
  Matrix<double> omega(a.cols(), sketch);
  for (Eigen::Index i = 0; i < omega.rows(); ++i)
    for (Eigen::Index j = 0; j < sketch; ++j) omega(i, j) = rng.normal();

  Matrix<double> y = a * omega;
  detail::orthonormalize_columns(y);
  for (std::size_t it = 0; it < kSvdPowerIterations; ++it) {
    Matrix<double> z = a.transpose() * y;
    detail::orthonormalize_columns(z);
    y = a * z;
    detail::orthonormalize_columns(y);
  }
  // B^T = A^T Q is cols x sketch; its left singular vectors are the right
  // singular vectors of A restricted to range(Q).
  Matrix<double> bt = a.transpose() * y;
  detail::hestenes_jacobi(bt);

  std::vector<double> norms(static_cast<std::size_t>(sketch));
  for (Eigen::Index j = 0; j < sketch; ++j) norms[static_cast<std::size_t>(j)] = bt.col(j).norm();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(sketch));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index lhs, Eigen::Index rhs) {
    return norms[static_cast<std::size_t>(lhs)] > norms[static_cast<std::size_t>(rhs)];
  });

  const double top = norms[static_cast<std::size_t>(order[0])];
  TruncatedSvd result;
  result.right_vectors = Matrix<double>::Zero(a.cols(), static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) {
    const Eigen::Index src = order[j];
    const double sigma = norms[static_cast<std::size_t>(src)];
    if (sigma > 1e-12 * top && sigma > 0.0) {
      result.right_vectors.col(static_cast<Eigen::Index>(j)) = bt.col(src) / sigma;
      result.singular_values.push_back(sigma);
    } else {
      result.singular_values.push_back(0.0);
    }
  }
  detail::orthonormalize_columns(result.right_vectors);
  detail::complete_orthonormal(result.right_vectors);

  for (Eigen::Index j = 0; j < result.right_vectors.cols(); ++j) {
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < result.right_vectors.rows(); ++i) {
      if (std::abs(result.right_vectors(i, j)) > std::abs(result.right_vectors(arg, j))) arg = i;
    }
    if (result.right_vectors(arg, j) < 0.0) result.right_vectors.col(j) *= -1.0;
  }
  return result;
}

/// Projects raw features into a shared d'-dimensional space: X * V, where V
/// holds the top right singular vectors of X. When X has fewer than d'
/// attributes (or rows), the missing trailing columns are zero.
template <typename T>
Matrix<T> unify_features(const Matrix<T>& x, std::size_t dprime, std::uint64_t seed) {
  if (dprime < 1) throw std::invalid_argument("unify_features: d' must be >= 1");
  Matrix<T> out = Matrix<T>::Zero(x.rows(), static_cast<Eigen::Index>(dprime));
  const std::size_t k =
      std::min({dprime, static_cast<std::size_t>(x.cols()), static_cast<std::size_t>(x.rows())});
  if (k == 0) return out;
  const TruncatedSvd svd = truncated_svd(x, k, seed);
  const Matrix<double> projected = x.template cast<double>() * svd.right_vectors;
  out.leftCols(static_cast<Eigen::Index>(k)) = projected.template cast<T>();
  return out;
}

}  // namespace agfm
