#pragma once

#include "mlsas/types.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace testing {

using mlsas::Index;
using mlsas::Matrix;
using mlsas::Vector;

inline Matrix randn(Index rows, Index cols, std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(gen);
  return m;
}

inline Vector randn(Index size, std::mt19937_64& gen) { return randn(size, 1, gen).col(0); }

/// Orthonormal columns from Eigen's own Householder QR.
inline Matrix orthonormal(Index rows, Index cols, std::mt19937_64& gen) {
  Eigen::HouseholderQR<Matrix> qr(randn(rows, cols, gen));
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

inline Vector normal_equations(const Matrix& a, const Vector& b) {
  return (a.transpose() * a).ldlt().solve(a.transpose() * b);
}

inline double rel(const Vector& x, const Vector& y) {
  const double scale = std::max(y.norm(), 1e-300);
  return (x - y).norm() / scale;
}

/// Orthonormal n x n Walsh-Hadamard matrix in Sylvester order.
inline Matrix hadamard(Index n) {
  Matrix h = Matrix::Ones(1, 1);
  while (h.rows() < n) {
    const Index k = h.rows();
    Matrix next(2 * k, 2 * k);
    next << h, h, h, -h;
    h = next;
  }
  return h / std::sqrt(static_cast<double>(n));
}

/// Orthonormal DCT-II matrix: C(k, j) = c_k cos(pi (2j + 1) k / (2n)).
inline Matrix dct_matrix(Index n) {
  const double pi = std::acos(-1.0);
  Matrix c(n, n);
  for (Index k = 0; k < n; ++k) {
    const double ck = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
    for (Index j = 0; j < n; ++j) {
      c(k, j) = ck * std::cos(pi * static_cast<double>((2 * j + 1) * k) / (2.0 * static_cast<double>(n)));
    }
  }
  return c;
}

}  // namespace testing
