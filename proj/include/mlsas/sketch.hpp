#pragma once

#include "mlsas/problems.hpp"
#include "mlsas/types.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mlsas {

enum class SketchKind { gaussian, uniform, leverage, srht, srtt };
enum class ScoreSource { plain_a, augmented_ab };

struct SketchFamily {
  SketchKind kind = SketchKind::uniform;
  /// uniform only; srht/srtt always select without replacement.
  bool with_replacement = true;
  /// leverage only.
  ScoreSource source = ScoreSource::plain_a;
  /// leverage only: extra diag(1/sqrt(l_i)) row weights in the sketched solve.
  bool weighted = false;

  std::string name() const;
  /// Accepts gaussian, uniform, uniform_wor, srht, srtt, leverage,
  /// leverage_aug, leverage_weighted, leverage_aug_weighted.
  static SketchFamily parse(const std::string& text);

  bool needs_problem() const { return kind == SketchKind::leverage; }
  bool samples_without_replacement() const;
};

/// Problem-level state shared by every operator of one family: leverage
/// sampling probabilities, the Rademacher diagonal D of SRHT/SRTT and the
/// cached T D [A, b, U] block. Immutable and safe to share across threads.
class SketchContext {
 public:
  static std::shared_ptr<const SketchContext> create(const SketchFamily& family,
                                                     const LSProblem& problem,
                                                     std::uint64_t seed);
  /// Data-oblivious context; throws MissingContext for leverage sampling.
  static std::shared_ptr<const SketchContext> create(const SketchFamily& family, Index m,
                                                     std::uint64_t seed);

  const SketchFamily& family() const { return family_; }
  Index source_rows() const { return m_; }
  /// Rows the selection draws from: m, or the padded length for SRHT.
  Index selectable_rows() const { return selectable_; }

  const Vector& signs() const { return signs_; }
  const Vector& scores() const { return scores_; }
  const Vector& probabilities() const { return probs_; }

  /// Unscaled weight of selectable row i; the operator multiplies it by 1/sqrt(s).
  double row_weight(Index i) const;

  /// T D pad(x) for srht/srtt; x itself otherwise.
  Matrix mix(const Matrix& x) const;

  bool bound_to(const LSProblem& problem) const { return bound_id_ && *bound_id_ == problem.id(); }
  /// Cached mix([A, b]) or mix([A, b, U]) for the bound problem (srht/srtt).
  const Matrix& mixed_cache() const { return mixed_; }
  bool caches_basis() const { return caches_basis_; }

  /// Draws selectable row indices for one stream, in draw order.
  std::vector<Index> draw_rows(Index count, std::uint64_t seed) const;

 private:
  SketchContext() = default;
  void init_mixing(std::uint64_t seed);

  SketchFamily family_;
  Index m_ = 0;
  Index selectable_ = 0;
  Vector signs_;
  Vector scores_;
  Vector probs_;
  std::vector<double> cumulative_;
  std::optional<std::uint64_t> bound_id_;
  Matrix mixed_;
  bool caches_basis_ = false;
};

/// One realized stream of row draws; operators are views over a prefix or a
/// contiguous slice of it.
class SketchDraws {
 public:
  static std::shared_ptr<const SketchDraws> draw(std::shared_ptr<const SketchContext> context,
                                                 Index count, std::uint64_t seed);
  /// Explicit selection, for constructing special operators in tests and audits.
  static std::shared_ptr<const SketchDraws> explicit_rows(
      std::shared_ptr<const SketchContext> context, std::vector<Index> rows);

  const SketchContext& context() const { return *context_; }
  const std::shared_ptr<const SketchContext>& context_ptr() const { return context_; }
  Index count() const { return count_; }
  Index row(Index k) const { return rows_[static_cast<std::size_t>(k)]; }
  std::uint64_t gaussian_seed() const { return gaussian_seed_; }

 private:
  SketchDraws() = default;
  std::shared_ptr<const SketchContext> context_;
  Index count_ = 0;
  std::vector<Index> rows_;
  std::uint64_t gaussian_seed_ = 0;
};

/// A realized s x m sketch S. Row k of S is the draw (offset + k) of the
/// underlying stream scaled by 1/sqrt(s).
class SketchOperator {
 public:
  SketchOperator(std::shared_ptr<const SketchDraws> draws, Index offset, Index rows);

  Index rows() const { return rows_; }
  Index source_rows() const { return draws_->context().source_rows(); }
  const SketchFamily& family() const { return draws_->context().family(); }
  const SketchContext& context() const { return draws_->context(); }
  const SketchDraws& draws() const { return *draws_; }
  Index offset() const { return offset_; }

  /// Selectable row picked by operator row k (sampling, srht, srtt).
  Index selected_row(Index k) const { return draws_->row(offset_ + k); }
  /// Nonzero value of operator row k (sampling families), or the row scale
  /// applied after mixing (srht, srtt).
  double row_scale(Index k) const;

  /// Explicit s x m matrix; intended for small m.
  Matrix dense() const;

 private:
  friend Matrix sketch_rows(const SketchOperator& op, const Matrix& x);
  friend Matrix gaussian_block(const SketchOperator& op, Index first, Index count);

  std::shared_ptr<const SketchDraws> draws_;
  Index offset_;
  Index rows_;
};

/// Rows [first, first + count) of the scaled Gaussian operator.
Matrix gaussian_block(const SketchOperator& op, Index first, Index count);

SketchOperator make_operator(const SketchFamily& family, Index s, Index m, std::uint64_t seed);
SketchOperator make_operator(const SketchFamily& family, Index s, const LSProblem& problem,
                             std::uint64_t seed);
/// Operator from an existing context (shares D and any cached transform).
SketchOperator draw_operator(std::shared_ptr<const SketchContext> context, Index s,
                             std::uint64_t seed);

struct SketchedSystem {
  Matrix sa;
  Vector sb;
  Flops apply_cost;
};

/// S A and S b from scratch (applies the full transform for srht/srtt).
SketchedSystem apply(const SketchOperator& op, const Matrix& a, const Vector& b);
/// S A and S b, reusing the context's cached T D [A, b] when bound to `problem`.
SketchedSystem apply(const SketchOperator& op, const LSProblem& problem);
/// S X for any m-row matrix.
Matrix sketch_rows(const SketchOperator& op, const Matrix& x);
/// S U for the problem's cached left singular vectors.
Matrix sketch_basis(const SketchOperator& op, const LSProblem& problem);

/// Model cost of forming S [A b] with `cols` columns.
Flops apply_cost(const SketchOperator& op, Index cols, bool cached);

/// Closed-form diag(E[S^T S]) for an s-row operator of this context.
/// Off-diagonal entries vanish for every family.
Vector second_moment_diagonal(const SketchContext& context, Index s);

/// Nested sketch for one sample path: level l uses the first
/// s_l = base_rows * 2^l draws; its split halves are the two consecutive
/// blocks of s_{l-1} draws, each with its own 1/sqrt(s_{l-1}) scale.
class NestedSketch {
 public:
  NestedSketch(std::shared_ptr<const SketchContext> context, int max_level, Index base_rows,
               std::uint64_t seed);

  int max_level() const { return max_level_; }
  Index base_rows() const { return base_rows_; }
  Index rows_at(int level) const { return base_rows_ << level; }

  SketchOperator level(int level) const;
  /// (S_a, S_b) with S_level = (1/sqrt 2)[S_a; S_b]. For level >= 1 each
  /// half is the level - 1 size; level 0 needs an even base size.
  std::pair<SketchOperator, SketchOperator> split(int level) const;

 private:
  std::shared_ptr<const SketchDraws> draws_;
  int max_level_;
  Index base_rows_;
};

/// Throws LevelTooLarge when s_L exceeds the rows available for selection.
NestedSketch make_nested(std::shared_ptr<const SketchContext> context, int max_level,
                         Index base_rows, std::uint64_t seed);

struct LeverageScores {
  Vector scores;
  Vector probs;
};

/// Exact leverage scores ||U_i||^2 of A or of [A, b].
LeverageScores leverage_scores(const Matrix& a, ScoreSource source,
                               const std::optional<Vector>& b = std::nullopt);

/// Row norms of A R^{-1}, with R from an SRTT sketch of A of the given size.
Vector approx_leverage_scores(const Matrix& a, Index sketch_size, std::uint64_t seed);

/// max_i max(approx_i / exact_i, exact_i / approx_i) over rows with exact_i > 0.
double max_score_ratio(const Vector& approx, const Vector& exact);

/// ||U^T S^T S U - I||_2 for orthonormal U.
double embedding_distortion(const SketchOperator& op, const Matrix& u);

std::string to_string(SketchKind kind);

}  // namespace mlsas
