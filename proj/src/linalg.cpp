#include "mlsas/linalg.hpp"

#include "mlsas/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace mlsas {

QRFactors::QRFactors(Matrix packed, Vector tau, Vector signs)
    : packed_(std::move(packed)), tau_(std::move(tau)), signs_(std::move(signs)) {}

Matrix QRFactors::r() const {
  const Index n = cols();
  Matrix r = packed_.topRows(n).triangularView<Eigen::Upper>();
  for (Index i = 0; i < n; ++i) r.row(i) *= signs_(i);
  return r;
}

Matrix QRFactors::q_thin() const {
  const Index s = rows();
  const Index n = cols();
  Matrix q = Matrix::Identity(s, n);
  for (Index k = n - 1; k >= 0; --k) {
    const Index len = s - k;
    if (tau_(k) == 0.0) continue;
    auto block = q.bottomRows(len);
    auto ess = packed_.col(k).tail(len - 1);
    Eigen::RowVectorXd w = block.row(0) + ess.transpose() * block.bottomRows(len - 1);
    block.row(0) -= tau_(k) * w;
    block.bottomRows(len - 1).noalias() -= tau_(k) * ess * w;
  }
  for (Index j = 0; j < n; ++j) q.col(j) *= signs_(j);
  return q;
}

Vector QRFactors::apply_qt(const Vector& y) const {
  const Index s = rows();
  const Index n = cols();
  if (y.size() != s) throw BadDimension("apply_qt: vector length does not match factor rows");
  Vector z = y;
  for (Index k = 0; k < n; ++k) {
    const Index len = s - k;
    if (tau_(k) == 0.0) continue;
    auto tail = z.tail(len);
    auto ess = packed_.col(k).tail(len - 1);
    const double w = tail(0) + ess.dot(tail.tail(len - 1));
    tail(0) -= tau_(k) * w;
    tail.tail(len - 1) -= (tau_(k) * w) * ess;
  }
  Vector out = z.head(n);
  return out.cwiseProduct(signs_);
}

Index QRFactors::rank_defect(double tol) const {
  const Index n = cols();
  if (n == 0) return -1;
  const double r11 = std::abs(packed_(0, 0));
  if (!(r11 > 0.0)) return 0;
  for (Index i = 1; i < n; ++i) {
    if (!(std::abs(packed_(i, i)) > tol * r11)) return i;
  }
  return -1;
}

Flops householder_cost(Index s, Index n) {
  // 2 s n^2 - 2/3 n^3, in thirds.
  return Flops::from_thirds(6 * s * n * n - 2 * n * n * n);
}

Flops merge_cost(Index n) { return Flops::from_thirds(10 * n * n * n); }

QRFactors householder_qr(Matrix a) {
  const Index s = a.rows();
  const Index n = a.cols();
  if (s < n) throw BadDimension("householder_qr: need rows >= cols");
  Vector tau = Vector::Zero(n);
  Vector signs = Vector::Ones(n);

  for (Index k = 0; k < n; ++k) {
    const Index len = s - k;
    auto col = a.col(k).tail(len);
    const double alpha = col(0);
    const double tail_sq = len > 1 ? col.tail(len - 1).squaredNorm() : 0.0;
    double beta = alpha;
    if (tail_sq > std::numeric_limits<double>::min()) {
      beta = std::sqrt(alpha * alpha + tail_sq);
      if (alpha >= 0.0) beta = -beta;
      col.tail(len - 1) /= (alpha - beta);
      tau(k) = (beta - alpha) / beta;
    } else if (len > 1) {
      col.tail(len - 1).setZero();
    }
    col(0) = beta;
    if (beta < 0.0) signs(k) = -1.0;

    const Index rest = n - k - 1;
    if (tau(k) != 0.0 && rest > 0) {
      auto block = a.block(k, k + 1, len, rest);
      auto ess = a.col(k).tail(len - 1);
      Eigen::RowVectorXd w = block.row(0) + ess.transpose() * block.bottomRows(len - 1);
      block.row(0) -= tau(k) * w;
      block.bottomRows(len - 1).noalias() -= tau(k) * ess * w;
    }
  }
  return QRFactors(std::move(a), std::move(tau), std::move(signs));
}

Vector back_substitute(const Matrix& r, const Vector& c) {
  return r.triangularView<Eigen::Upper>().solve(c);
}

QRSolution qr_solve(const Matrix& sa, const Vector& sb) {
  if (sa.rows() != sb.size()) throw BadDimension("qr_solve: rhs length does not match rows");
  if (sa.rows() < sa.cols()) throw BadDimension("qr_solve: need s >= n");
  QRSolution out;
  out.factors = householder_qr(sa);
  if (const Index bad = out.factors.rank_defect(); bad >= 0) throw RankDeficient(bad);
  out.qt_b = out.factors.apply_qt(sb);
  out.x = back_substitute(out.factors.r(), out.qt_b);
  out.cost = householder_cost(sa.rows(), sa.cols());
  return out;
}

namespace {

void check_triangular_rank(const Matrix& r) {
  const Index n = r.rows();
  const double r11 = std::abs(r(0, 0));
  if (!(r11 > 0.0)) throw RankDeficient(0);
  for (Index i = 1; i < n; ++i) {
    if (!(std::abs(r(i, i)) > rank_tol * r11)) throw RankDeficient(i);
  }
}

}  // namespace

MergeSolution merge_solve(const Matrix& ra, const Matrix& rb, const Vector& qa_t_b,
                          const Vector& qb_t_b) {
  const Index n = ra.rows();
  if (ra.cols() != n || rb.rows() != n || rb.cols() != n || qa_t_b.size() != n ||
      qb_t_b.size() != n) {
    throw BadDimension("merge_solve: inputs must be n x n factors and length-n vectors");
  }
  check_triangular_rank(ra);
  check_triangular_rank(rb);

  Matrix stacked(2 * n, n);
  stacked << ra, rb;
  Vector rhs(2 * n);
  rhs << qa_t_b, qb_t_b;

  const QRFactors f = householder_qr(std::move(stacked));
  if (const Index bad = f.rank_defect(); bad >= 0) throw RankDeficient(bad);
  const Vector c = f.apply_qt(rhs);
  const Matrix r = f.r();

  MergeSolution out;
  out.x = back_substitute(r, c);
  out.r = r * M_SQRT1_2;
  out.qt_b = c * M_SQRT1_2;
  out.cost = merge_cost(n);
  return out;
}

Matrix ThinSVD::reconstruct() const { return u * sigma.asDiagonal() * v.transpose(); }

ThinSVD thin_svd(const Matrix& a) {
  if (a.rows() < a.cols()) throw BadDimension("thin_svd: need rows >= cols");
  const QRFactors qr = householder_qr(a);
  Eigen::JacobiSVD<Matrix> small(qr.r(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (small.info() != Eigen::Success) {
    throw ConvergenceFailure("thin_svd: SVD of the R factor did not converge");
  }
  ThinSVD out;
  out.u = qr.q_thin() * small.matrixU();
  out.sigma = small.singularValues();
  out.v = small.matrixV();
  const Index n = out.sigma.size();
  out.rank_deficient = n > 0 && !(out.sigma(n - 1) > rank_tol * out.sigma(0));
  return out;
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

double smallest_singular_value(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

double residual_norm(const Matrix& a, const Vector& b, const Vector& x) {
  if (a.cols() != x.size() || a.rows() != b.size()) {
    throw BadDimension("residual_norm: dimension mismatch");
  }
  return (a * x - b).norm();
}

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace mlsas
