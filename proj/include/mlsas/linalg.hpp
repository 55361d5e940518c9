#pragma once

#include "mlsas/types.hpp"

namespace mlsas {

/// |r_ii| <= rank_tol * |r_11| marks a numerically rank-deficient factor.
inline constexpr double rank_tol = 1e-12;

/// Compact Householder QR of an s x n matrix (s >= n).
///
/// Reflectors are kept in the strict lower part of `packed`; R is stored
/// with a nonnegative diagonal, the sign flips being folded into Q.
class QRFactors {
 public:
  QRFactors() = default;
  QRFactors(Matrix packed, Vector tau, Vector signs);

  Index rows() const { return packed_.rows(); }
  Index cols() const { return packed_.cols(); }

  /// Upper triangular n x n factor.
  Matrix r() const;
  /// Thin s x n orthonormal factor, formed on demand.
  Matrix q_thin() const;
  /// First n entries of Q^T y (with the sign convention applied).
  Vector apply_qt(const Vector& y) const;

  /// Index of the first diagonal entry failing the rank test, or -1.
  Index rank_defect(double tol = rank_tol) const;

 private:
  Matrix packed_;
  Vector tau_;
  Vector signs_;
};

/// Model cost of a Householder QR least-squares solve: 2sn^2 - 2/3 n^3.
Flops householder_cost(Index s, Index n);
/// Model cost of re-triangularizing two stacked n x n R factors: 10/3 n^3.
Flops merge_cost(Index n);

/// Householder QR without any rank test.
QRFactors householder_qr(Matrix a);

struct QRSolution {
  Vector x;
  QRFactors factors;
  Vector qt_b;  // Q^T sb, length n
  Flops cost;
};

/// Least-squares solve of min ||sa x - sb|| by Householder QR.
/// Throws RankDeficient when |r_ii| <= rank_tol |r_11|.
QRSolution qr_solve(const Matrix& sa, const Vector& sb);

struct MergeSolution {
  Vector x;
  /// R and Q^T b of the stacked system (1/sqrt 2)[S_a A; S_b A], so the
  /// result can itself be merged again.
  Matrix r;
  Vector qt_b;
  Flops cost;
};

/// Solves the sketch (1/sqrt 2)[S_a; S_b] from the two half factorizations
/// by triangularizing [ra; rb] only.
MergeSolution merge_solve(const Matrix& ra, const Matrix& rb, const Vector& qa_t_b,
                          const Vector& qb_t_b);

/// Solves R x = c for upper triangular R.
Vector back_substitute(const Matrix& r, const Vector& c);

struct ThinSVD {
  Matrix u;      // m x n, orthonormal columns
  Vector sigma;  // n, nonincreasing
  Matrix v;      // n x n, orthogonal
  /// Set when sigma_n <= rank_tol * sigma_1.
  bool rank_deficient = false;

  Matrix reconstruct() const;
};

/// Thin SVD via Householder QR followed by an SVD of the n x n R factor.
/// Throws ConvergenceFailure if the small SVD reports failure.
ThinSVD thin_svd(const Matrix& a);

/// Largest singular value.
double spectral_norm(const Matrix& a);

/// Smallest singular value.
double smallest_singular_value(const Matrix& a);

/// ||a x - b||_2.
double residual_norm(const Matrix& a, const Vector& b, const Vector& x);

/// max_ij |m_ij|.
double max_abs(const Matrix& m);

}  // namespace mlsas
