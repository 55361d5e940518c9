#pragma once

#include "mlsas/problems.hpp"
#include "mlsas/samples.hpp"
#include "mlsas/sketch.hpp"
#include "mlsas/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mlsas {

/// Spectral-norm factors of one level difference, plus the relative error of
/// rebuilding A Delta x from them.
struct FactorNorms {
  double h_inv_sq = 0.0;      // ||H_l^{-1}||^2, H_l = (H_a + H_b) / 2
  double h_diff_sq = 0.0;     // ||H_a - H_b||^2
  double h_b_sq = 0.0;        // ||H_b||^2
  double x_ab_diff_sq = 0.0;  // ||x_a - x_b||^2
  /// ||A dx - rebuilt|| / ||A dx||, or the absolute norm when A dx = 0.
  double reconstruction_error = 0.0;
  double a_delta_norm = 0.0;
};

struct LevelStats {
  int level = 0;
  Index sketch_rows = 0;
  Index N = 0;
  Vector mean_delta;
  /// Unbiased: N / (N - 1) * (alpha - beta_of_delta).
  double V_ell = 0.0;
  /// alpha - beta_of_delta as computed, without the N / (N - 1) factor.
  double V_plugin = 0.0;
  double v_stderr = 0.0;
  double alpha = 0.0;          // mean ||A dx||^2
  double beta_of_delta = 0.0;  // ||A mean(dx)||^2
  double beta_of_x = 0.0;      // ||A mean(x_fine)||^2
  double C_ell = 0.0;          // mean model solve cost per sample
  double apply_cost = 0.0;     // mean model sketch-application cost per sample
  std::optional<FactorNorms> factor_norms;
};

/// Throws TooFewSamples for fewer than two samples and InvalidSpec when the
/// samples mix levels or modes.
LevelStats level_stats(const std::vector<LevelDelta>& samples, const LSProblem& problem);

/// Scalar total variance: sum_i ||A x_i - mean||^2 / (N - 1).
double total_variance(const std::vector<Vector>& xs, const LSProblem& problem);

/// Factors for halves (sa, sb) and the sample built from them. Requires a
/// cached SVD. x_a and x_b are taken from the sample when it carries both,
/// otherwise solved from the halves.
FactorNorms factor_decomposition(const LSProblem& problem, const SketchOperator& sa,
                                 const SketchOperator& sb, const LevelDelta& sample);
FactorNorms factor_decomposition(const LevelDelta& sample, const LSProblem& problem,
                                 const NestedSketch& nested, int level);

/// Element-wise mean of factor records.
FactorNorms mean_factors(const std::vector<FactorNorms>& records);

struct SlopeFit {
  std::vector<double> xs;
  std::vector<double> ys;  // log2 of the measured values
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// OLS of log2(values) against xs. Needs >= 3 points; throws NonPositiveValue
/// on values <= 0 or nonfinite.
SlopeFit fit_slope(const std::vector<double>& xs, const std::vector<double>& values);

struct Correlation {
  double rho_x = 0.0;
  double rho_ax = 0.0;
  Index pairs = 0;
};

/// trace(Cov(X, Y)) / sqrt(trace(Cov(X, X)) trace(Cov(Y, Y))) for the pairs
/// (lo[i], hi[i]), for the vectors themselves and for A times them.
Correlation cross_level_correlation(const std::vector<Vector>& lo, const std::vector<Vector>& hi,
                                    const LSProblem& problem, Index min_pairs = 30);

enum class CostVariant { classic, merged, recycled, measured };

std::string to_string(CostVariant variant);
CostVariant parse_cost_variant(const std::string& text);

/// Per-sample model costs for levels 0..L with s_l = base_rows * 2^l.
///   classic:  C_0 = 2 s_0 n^2 - 2/3 n^3, C_l = 4 s_l n^2 - 2 n^3
///   merged:   C_0 as above,             C_l = 2 s_l n^2 + 2 n^3
///   recycled: C_0 as above, C_1 = 2 s_1 n^2 + 2 n^3, C_l = 10/3 n^3 (l >= 2)
std::vector<Flops> level_costs(CostVariant variant, int max_level, Index n, Index base_rows);

/// Householder cost of one SAS solve at s_L, the simple Monte Carlo sample cost.
Flops mc_sample_cost(int max_level, Index n, Index base_rows);

struct CostReport {
  double eps = 0.0;
  CostVariant variant = CostVariant::merged;
  std::vector<double> V;
  std::vector<double> C;
  std::vector<double> sqrt_vc;
  double mlsas_total = 0.0;  // eps^-2 (sum sqrt(V C))^2
  double mc_V_L = 0.0;
  double mc_C_L = 0.0;
  double mc_total = 0.0;  // eps^-2 V_L C_L
  bool mlsas_more_expensive = false;
  std::string verdict;
};

/// Evaluates both totals. V and C must be positive and of equal length.
CostReport cost_compare(const std::vector<double>& V, const std::vector<double>& C, double mc_V_L,
                        double mc_C_L, double eps, CostVariant variant);

/// Closed form n^3 V0 (sqrt(c0) + sqrt(c1 / 4) + sqrt(c2) / 2 (1 - 2^(1-L)))^2 for
/// V_l = 4^-l V0 and level costs (c0, c1, c2, ..., c2) n^3.
double analytic_mlsas_cost(double V0, double n, int max_level, double c0, double c1, double c2);

struct MCTrend {
  SlopeFit fit;
  std::vector<Index> sizes;
  std::vector<double> variance;
  std::vector<double> bound;  // n / (s - n - 1) ||A x* - b||^2
  std::vector<Index> samples;
  bool within_bound = true;   // gaussian only: variance <= 1.2 bound everywhere
};

/// Var(A x_hat) of N independent SAS solutions at each size.
MCTrend mc_variance_trend(const LSProblem& problem, const SketchFamily& family,
                          const std::vector<Index>& sizes, Index N, std::uint64_t seed,
                          int workers = 1);

}  // namespace mlsas
