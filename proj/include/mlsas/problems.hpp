#pragma once

#include "mlsas/linalg.hpp"
#include "mlsas/types.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace mlsas {

enum class ProblemKind { randsvd_haar, coherent_spike, file };

struct ProblemSpec {
  Index m = 6400;
  Index n = 50;
  double cond = 1e2;
  double noise = 1e-3;
  std::uint64_t seed = 0;
  ProblemKind kind = ProblemKind::randsvd_haar;

  // coherent_spike: the first `spike_rows` rows of the Gaussian seed matrix
  // are multiplied by `spike_scale` before orthonormalization.
  Index spike_rows = 0;  // 0 means n
  double spike_scale = 1e3;

  // file: CSV or Matrix Market array; b is the last column when
  // `b_last_column` is set, otherwise b is generated as A g + noise h.
  std::string path;
  bool b_last_column = true;

  void validate() const;
};

/// Dense least-squares instance min ||A x - b||_2 with cached references.
/// Immutable once built.
class LSProblem {
 public:
  LSProblem(Matrix a, Vector b);

  const Matrix& a() const { return a_; }
  const Vector& b() const { return b_; }
  Index rows() const { return a_.rows(); }
  Index cols() const { return a_.cols(); }

  /// Process-unique identity, copied along with the problem.
  std::uint64_t id() const { return id_; }

  const std::optional<ThinSVD>& svd() const { return svd_; }
  const std::optional<Vector>& x_star() const { return x_star_; }
  const std::optional<double>& residual_star() const { return residual_star_; }

  /// Returns a copy with the given SVD attached (no recomputation).
  LSProblem with_svd(ThinSVD svd) const;
  /// Returns a copy with SVD, exact solution and optimal residual computed.
  LSProblem with_references() const;

 private:
  Matrix a_;
  Vector b_;
  std::uint64_t id_;
  std::optional<ThinSVD> svd_;
  std::optional<Vector> x_star_;
  std::optional<double> residual_star_;
};

LSProblem generate(const ProblemSpec& spec);

/// Haar-distributed m x n matrix with orthonormal columns: QR of a Gaussian
/// matrix with the R diagonal made nonnegative.
Matrix haar_orthonormal(Index m, Index n, std::uint64_t seed, std::uint32_t purpose_tag);

/// (m/n) max_i ||U_i||^2. Throws MissingSVD when no SVD is cached.
double coherence(const LSProblem& problem);

struct ExactSolution {
  Vector x_star;
  double residual_star;
};
/// Full Householder QR solve of the unsketched problem.
ExactSolution exact_solve(const LSProblem& problem);

double residual_norm(const LSProblem& problem, const Vector& x);

struct LoadOptions {
  bool b_last_column = true;
};

/// Reads a dense matrix from CSV (optional header row) or Matrix Market
/// array format, chosen by extension (.mtx) or by the %%MatrixMarket banner.
Matrix read_dense_matrix(const std::string& path);

/// Loads a problem from file; with `b_last_column` the final column is b.
LSProblem load_problem(const std::string& path, const LoadOptions& options);

std::string to_string(ProblemKind kind);
ProblemKind parse_problem_kind(const std::string& text);

}  // namespace mlsas
