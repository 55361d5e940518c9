#pragma once

#include "mlsas/diagnostics.hpp"
#include "mlsas/problems.hpp"
#include "mlsas/samples.hpp"
#include "mlsas/sketch.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace mlsas {

struct SASResult {
  Vector x;
  Flops cost;
  Flops apply_cost;
  Matrix r;     // R of the sketched QR, nonnegative diagonal
  Vector qt_b;  // first n entries of Q^T S b
};

/// argmin ||S (A x - b)||. Propagates RankDeficient.
SASResult sas_solve(const LSProblem& problem, const SketchOperator& op);

/// Default s_0 = 2n.
inline Index default_base_rows(Index n) { return 2 * n; }

/// s-row operator drawn from stream `id`.
SketchOperator sample_operator(std::shared_ptr<const SketchContext> context, Index s,
                               std::uint64_t seed, StreamId id);

/// Nested sketch up to `level` for one sample stream.
NestedSketch sample_nested(std::shared_ptr<const SketchContext> context, int level,
                           Index base_rows, std::uint64_t seed, StreamId id);

/// SAS solve of sample `index` with the resample-once policy.
SASResult sample_sas(const LSProblem& problem, std::shared_ptr<const SketchContext> context,
                     Index s, std::uint64_t seed, Index index, int* attempts = nullptr);

struct MCResult {
  Vector x_bar;
  double variance = 0.0;  // unbiased total variance of A x_hat; NaN for N = 1
  Flops cost;
  Flops apply_cost;
  std::vector<Vector> samples;
};

MCResult mc_average(const LSProblem& problem, std::shared_ptr<const SketchContext> context,
                    Index s, Index N, std::uint64_t seed, int workers = 1);
MCResult mc_average(const LSProblem& problem, const SketchFamily& family, Index s, Index N,
                    std::uint64_t seed, int workers = 1);

/// Level difference from explicit halves; level >= 1, mode antithetic or plain.
LevelDelta delta_from_halves(const LSProblem& problem, const SketchOperator& sa,
                             const SketchOperator& sb, DeltaMode mode, int level);

/// Level difference on one nested sketch; level 0 returns the plain SAS solution.
LevelDelta sample_delta(const LSProblem& problem, const NestedSketch& nested, int level,
                        DeltaMode mode);

/// Sample `index` of `level`, drawn from its own stream, with the resample-once policy.
LevelDelta sample_delta(const LSProblem& problem, std::shared_ptr<const SketchContext> context,
                        int level, Index base_rows, DeltaMode mode, std::uint64_t seed,
                        Index index);

/// Samples [first, first + count) of one level.
std::vector<LevelDelta> sample_level(const LSProblem& problem,
                                     std::shared_ptr<const SketchContext> context, int level,
                                     Index base_rows, DeltaMode mode, std::uint64_t seed,
                                     Index first, Index count, int workers = 1);

struct EstimatorConfig {
  SketchFamily family;
  DeltaMode mode = DeltaMode::antithetic;
  int L = 4;
  double eps = 1e-3;
  Index n_pilot = 100;
  bool recycle = false;
  std::uint64_t seed = 0;
  Index base_rows = 0;  // 0 means 2n
  int workers = 1;
  /// When set, the computable bias bound is evaluated with this eta.
  std::optional<double> bias_eta;
  /// Allocations above this per-level count raise AllocationInfeasible.
  Index max_samples = 10'000'000;

  void validate() const;
  Index base_for(Index n) const { return base_rows > 0 ? base_rows : default_base_rows(n); }
};

struct MLSASResult {
  Vector x_hat;
  std::vector<LevelStats> per_level;
  Flops total_cost;
  Flops apply_cost;
  std::optional<double> bias_bound;
  double variance_total = 0.0;  // sum V_l / N_l
  bool max_level_reached = false;
  int iterations = 0;
};

/// ceil(eps^-2 sqrt(V_l / C_l) sum_k sqrt(V_k C_k)). Throws AllocationInfeasible
/// on nonfinite input and NonPositiveValue on V < 0, C <= 0 or eps <= 0.
std::vector<Index> optimal_allocation(const std::vector<double>& V, const std::vector<double>& C,
                                      double eps);

/// Fixed-L estimator: pilot, allocate for eps^2, top up.
MLSASResult mlsas_estimate(const LSProblem& problem, const EstimatorConfig& config);

/// Adaptive driver starting from config.L, splitting eps^2 evenly between
/// variance and squared bias.
MLSASResult adaptive_mlsas(const LSProblem& problem, const EstimatorConfig& config);

/// sqrt(4 eta (n / s_L) ((1 + eta) ||A x_L - b||)^2 lev_max).
double bias_bound(const LSProblem& problem, const Vector& x_L, Index s_L, double eta,
                  double lev_max);
/// Same with ||A x* - b|| in place of (1 + eta) ||A x_L - b||; needs residual_star.
double bias_bound_exact(const LSProblem& problem, Index s_L, double eta, double lev_max);

/// max_i ||U_i||^2 from the cached SVD, or from sketched scores when absent.
double max_leverage(const LSProblem& problem, std::uint64_t seed);

// ---------------------------------------------------------------- recycling

/// One reusable solution: x together with the (R, Q^T b) pair that lets it be
/// merged into a larger sketch.
struct BaseUnit {
  Vector x;
  Matrix r;
  Vector qt_b;
};

struct RecycledSamples {
  Index base_rows = 0;
  /// deltas[l][j] is sample j of level l.
  std::vector<std::vector<LevelDelta>> deltas;
  /// sources[l][j]: indices into pool (l % 2) feeding sample j (l >= 2), or
  /// the sample's own pool index at levels 0 and 1.
  std::vector<std::vector<std::vector<Index>>> sources;
  /// usage[p][u]: levels whose Delta terms use unit u of pool p.
  std::vector<std::vector<int>> usage[2];
};

/// Level 0 holds counts[0] SAS solutions at s_0 and level 1 counts[1]
/// antithetic samples; both sets are the base pools. Level l >= 2 merges
/// 2^(l - p) fresh units of pool p = l % 2 per sample. Throws
/// InsufficientBaseSamples when counts[l] > 2^-l counts[p] or a pool runs out.
RecycledSamples recycled_sampler(const LSProblem& problem,
                                 std::shared_ptr<const SketchContext> context,
                                 const std::vector<Index>& counts, Index base_rows,
                                 std::uint64_t seed, int workers = 1);

/// True when every unit is used at most twice and never by adjacent levels.
bool audit_usage(const RecycledSamples& samples);

/// (lo, hi) vector pairs for levels lo and lo + 2: each level-(lo+2) sample
/// is paired with every level-lo sample it was built from.
std::pair<std::vector<Vector>, std::vector<Vector>> recycled_pairs(const RecycledSamples& samples,
                                                                   int lo);

}  // namespace mlsas
