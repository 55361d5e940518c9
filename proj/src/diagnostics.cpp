#include "mlsas/diagnostics.hpp"

#include "mlsas/errors.hpp"
#include "mlsas/estimators.hpp"
#include "mlsas/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mlsas {

constexpr Index kChunk = 256;

LevelStats level_stats(const std::vector<LevelDelta>& samples, const LSProblem& problem) {
  const Index N = static_cast<Index>(samples.size());
  if (N < 2) throw TooFewSamples("level statistics need at least two samples");
  const int level = samples.front().level;
  const DeltaMode mode = samples.front().mode;
  const Index n = problem.cols();
  LevelStats st;
  st.level = level;
  st.sketch_rows = samples.front().sketch_rows;
  st.N = N;
  st.mean_delta = Vector::Zero(n);
  Vector mean_fine = Vector::Zero(n);
  double cost = 0.0;
  double apply_cost = 0.0;
  for (Index i = 0; i < N; ++i) {
    const LevelDelta& d = samples[static_cast<std::size_t>(i)];
    if (d.level != level || d.mode != mode) throw InvalidSpec("samples mix levels or modes");
    st.mean_delta += d.delta_x;
    mean_fine += d.fine_x;
    cost += d.cost.value();
    apply_cost += d.apply_cost.value();
  }
  const double dn = static_cast<double>(N);
  st.mean_delta /= dn;
  mean_fine /= dn;
  st.C_ell = cost / dn;
  st.apply_cost = apply_cost / dn;

  const Vector a_mean = problem.a() * st.mean_delta;
  Vector sq(N), centered(N);
  for (Index first = 0; first < N; first += kChunk) {
    const Index count = std::min(kChunk, N - first);
    Matrix block(n, count);
    for (Index k = 0; k < count; ++k) block.col(k) = samples[static_cast<std::size_t>(first + k)].delta_x;
    const Matrix ad = problem.a() * block;
    sq.segment(first, count) = ad.colwise().squaredNorm().transpose();
    centered.segment(first, count) = (ad.colwise() - a_mean).colwise().squaredNorm().transpose();
  }
  st.alpha = sq.mean();
  st.beta_of_delta = a_mean.squaredNorm();
  st.beta_of_x = (problem.a() * mean_fine).squaredNorm();
  st.V_plugin = st.alpha - st.beta_of_delta;
  st.V_ell = dn / (dn - 1.0) * st.V_plugin;

  const double c_mean = centered.mean();
  const double c_var = (centered.array() - c_mean).square().sum() / (dn - 1.0);
  st.v_stderr = std::sqrt(c_var / dn) * dn / (dn - 1.0);
  return st;
}

double total_variance(const std::vector<Vector>& xs, const LSProblem& problem) {
  const Index N = static_cast<Index>(xs.size());
  if (N < 2) throw TooFewSamples("variance needs at least two samples");
  Vector mean = Vector::Zero(problem.cols());
  for (const auto& x : xs) mean += x;
  mean /= static_cast<double>(N);
  const Vector a_mean = problem.a() * mean;
  double sum = 0.0;
  for (Index first = 0; first < N; first += kChunk) {
    const Index count = std::min(kChunk, N - first);
    Matrix block(problem.cols(), count);
    for (Index k = 0; k < count; ++k) block.col(k) = xs[static_cast<std::size_t>(first + k)];
    sum += ((problem.a() * block).colwise() - a_mean).squaredNorm();
  }
  return sum / static_cast<double>(N - 1);
}

namespace {

double spectral_sq(const Matrix& m) {
  const double s = spectral_norm(m);
  return s * s;
}

}  // namespace

FactorNorms factor_decomposition(const LSProblem& problem, const SketchOperator& sa,
                                 const SketchOperator& sb, const LevelDelta& sample) {
  if (!problem.svd()) throw MissingSVD("factor decomposition needs the thin SVD of A");
  const ThinSVD& svd = *problem.svd();
  const Matrix sau = sketch_basis(sa, problem);
  const Matrix sbu = sketch_basis(sb, problem);
  const Matrix ha = sau.transpose() * sau;
  const Matrix hb = sbu.transpose() * sbu;
  const Matrix hsum = ha + hb;
  const Matrix hdiff = ha - hb;

  Vector xa, xb;
  if (sample.coarse_parts.size() == 2) {
    xa = sample.coarse_parts[0];
    xb = sample.coarse_parts[1];
  } else {
    xa = sas_solve(problem, sa).x;
    xb = sas_solve(problem, sb).x;
  }

  FactorNorms f;
  const Matrix h_level = 0.5 * hsum;
  f.h_inv_sq = spectral_sq(h_level.inverse());
  f.h_diff_sq = spectral_sq(hdiff);
  f.h_b_sq = spectral_sq(hb);
  f.x_ab_diff_sq = (xa - xb).squaredNorm();

  const Eigen::LDLT<Matrix> hsum_ldlt(hsum);
  const Vector sv = svd.sigma.asDiagonal() * (svd.v.transpose() * (xa - xb));
  Vector rebuilt;
  if (sample.mode == DeltaMode::plain) {
    rebuilt = svd.u * hsum_ldlt.solve(hb * (-sv));
  } else {
    rebuilt = 0.5 * (svd.u * hsum_ldlt.solve(hdiff * sv));
  }
  const Vector ad = problem.a() * sample.delta_x;
  f.a_delta_norm = ad.norm();
  const double err = (ad - rebuilt).norm();
  f.reconstruction_error = f.a_delta_norm > 0.0 ? err / f.a_delta_norm : err;
  return f;
}

FactorNorms factor_decomposition(const LevelDelta& sample, const LSProblem& problem,
                                 const NestedSketch& nested, int level) {
  const auto [sa, sb] = nested.split(level);
  return factor_decomposition(problem, sa, sb, sample);
}

FactorNorms mean_factors(const std::vector<FactorNorms>& records) {
  FactorNorms m;
  if (records.empty()) return m;
  for (const auto& r : records) {
    m.h_inv_sq += r.h_inv_sq;
    m.h_diff_sq += r.h_diff_sq;
    m.h_b_sq += r.h_b_sq;
    m.x_ab_diff_sq += r.x_ab_diff_sq;
    m.reconstruction_error = std::max(m.reconstruction_error, r.reconstruction_error);
    m.a_delta_norm += r.a_delta_norm;
  }
  const double k = static_cast<double>(records.size());
  m.h_inv_sq /= k;
  m.h_diff_sq /= k;
  m.h_b_sq /= k;
  m.x_ab_diff_sq /= k;
  m.a_delta_norm /= k;
  return m;
}

SlopeFit fit_slope(const std::vector<double>& xs, const std::vector<double>& values) {
  if (xs.size() != values.size()) throw BadDimension("fit_slope: xs and values differ in length");
  if (xs.size() < 3) throw TooFewSamples("fit_slope needs at least three points");
  SlopeFit fit;
  fit.xs = xs;
  for (double v : values) {
    if (!std::isfinite(v) || !(v > 0.0)) throw NonPositiveValue("fit_slope: values must be positive");
    fit.ys.push_back(std::log2(v));
  }
  const double k = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / k;
  const double my = std::accumulate(fit.ys.begin(), fit.ys.end(), 0.0) / k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = fit.ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw BadDimension("fit_slope: xs are all equal");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return fit;
}

namespace {

struct Moments {
  double xy = 0.0;
  double xx = 0.0;
  double yy = 0.0;

  double rho() const {
    if (!(xx > 0.0) || !(yy > 0.0)) return 0.0;
    return xy / std::sqrt(xx * yy);
  }
};

}  // namespace

Correlation cross_level_correlation(const std::vector<Vector>& lo, const std::vector<Vector>& hi,
                                    const LSProblem& problem, Index min_pairs) {
  if (lo.size() != hi.size()) throw BadDimension("correlation needs paired samples");
  const Index N = static_cast<Index>(lo.size());
  if (N < min_pairs) throw TooFewSamples("correlation needs at least " + std::to_string(min_pairs) + " pairs");
  const Index n = problem.cols();
  Vector mx = Vector::Zero(n), my = Vector::Zero(n);
  for (Index i = 0; i < N; ++i) {
    mx += lo[static_cast<std::size_t>(i)];
    my += hi[static_cast<std::size_t>(i)];
  }
  mx /= static_cast<double>(N);
  my /= static_cast<double>(N);

  // common 1/N factors cancel in the ratio
  Moments plain, mapped;
  for (Index first = 0; first < N; first += kChunk) {
    const Index count = std::min(kChunk, N - first);
    Matrix cx(n, count), cy(n, count);
    for (Index k = 0; k < count; ++k) {
      cx.col(k) = lo[static_cast<std::size_t>(first + k)] - mx;
      cy.col(k) = hi[static_cast<std::size_t>(first + k)] - my;
    }
    plain.xy += cx.cwiseProduct(cy).sum();
    plain.xx += cx.squaredNorm();
    plain.yy += cy.squaredNorm();
    const Matrix ax = problem.a() * cx;
    const Matrix ay = problem.a() * cy;
    mapped.xy += ax.cwiseProduct(ay).sum();
    mapped.xx += ax.squaredNorm();
    mapped.yy += ay.squaredNorm();
  }
  Correlation c;
  c.pairs = N;
  c.rho_x = plain.rho();
  c.rho_ax = mapped.rho();
  return c;
}

std::string to_string(CostVariant variant) {
  switch (variant) {
    case CostVariant::classic: return "classic";
    case CostVariant::merged: return "merged";
    case CostVariant::recycled: return "recycled";
    case CostVariant::measured: return "measured";
  }
  return "unknown";
}

CostVariant parse_cost_variant(const std::string& text) {
  if (text == "classic") return CostVariant::classic;
  if (text == "merged") return CostVariant::merged;
  if (text == "recycled") return CostVariant::recycled;
  if (text == "measured") return CostVariant::measured;
  throw InvalidSpec("unknown cost variant '" + text + "'");
}

std::vector<Flops> level_costs(CostVariant variant, int max_level, Index n, Index base_rows) {
  if (max_level < 0) throw BadDimension("max level must be >= 0");
  if (variant == CostVariant::measured) throw InvalidSpec("measured costs come from the samples");
  const std::int64_t n2 = static_cast<std::int64_t>(n) * n;
  const std::int64_t n3 = n2 * n;
  std::vector<Flops> C;
  C.push_back(householder_cost(base_rows, n));
  for (int l = 1; l <= max_level; ++l) {
    const std::int64_t s = static_cast<std::int64_t>(base_rows) << l;
    if (variant == CostVariant::classic) {
      C.push_back(Flops::whole(4 * s * n2 - 2 * n3));
    } else if (variant == CostVariant::merged || l == 1) {
      C.push_back(Flops::whole(2 * s * n2 + 2 * n3));
    } else {
      C.push_back(merge_cost(n));
    }
  }
  return C;
}

Flops mc_sample_cost(int max_level, Index n, Index base_rows) {
  return householder_cost(base_rows << max_level, n);
}

CostReport cost_compare(const std::vector<double>& V, const std::vector<double>& C, double mc_V_L,
                        double mc_C_L, double eps, CostVariant variant) {
  if (V.size() != C.size() || V.empty()) throw BadDimension("V and C must have equal nonzero length");
  if (!(eps > 0.0)) throw NonPositiveValue("eps must be positive");
  if (!(mc_V_L > 0.0) || !(mc_C_L > 0.0)) throw NonPositiveValue("MC variance and cost must be positive");
  CostReport r;
  r.eps = eps;
  r.variant = variant;
  r.V = V;
  r.C = C;
  double sum = 0.0;
  for (std::size_t l = 0; l < V.size(); ++l) {
    if (!(V[l] > 0.0) || !(C[l] > 0.0)) throw NonPositiveValue("V and C must be positive");
    r.sqrt_vc.push_back(std::sqrt(V[l] * C[l]));
    sum += r.sqrt_vc.back();
  }
  const double inv_eps2 = 1.0 / (eps * eps);
  r.mlsas_total = inv_eps2 * sum * sum;
  r.mc_V_L = mc_V_L;
  r.mc_C_L = mc_C_L;
  r.mc_total = inv_eps2 * mc_V_L * mc_C_L;
  r.mlsas_more_expensive = r.mlsas_total > r.mc_total;
  r.verdict = r.mlsas_more_expensive ? "MLSAS_total > MC_total" : "MLSAS_total <= MC_total";
  return r;
}

double analytic_mlsas_cost(double V0, double n, int max_level, double c0, double c1, double c2) {
  const double n3 = n * n * n;
  if (max_level == 0) return n3 * V0 * c0;
  double bracket = std::sqrt(c0) + std::sqrt(c1 / 4.0);
  if (max_level >= 2) bracket += std::sqrt(c2) / 2.0 * (1.0 - std::pow(2.0, 1 - max_level));
  return n3 * V0 * bracket * bracket;
}

MCTrend mc_variance_trend(const LSProblem& problem, const SketchFamily& family,
                          const std::vector<Index>& sizes, Index N, std::uint64_t seed,
                          int workers) {
  if (N < 2) throw TooFewSamples("variance trend needs N >= 2");
  const Index n = problem.cols();
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] <= n + 1) throw BadDimension("every size must exceed n + 1");
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw BadDimension("sizes must be strictly increasing");
  }
  const double res = problem.residual_star() ? *problem.residual_star() : exact_solve(problem).residual_star;
  const auto ctx = SketchContext::create(family, problem, seed);
  MCTrend t;
  t.sizes = sizes;
  std::vector<double> xs;
  for (Index s : sizes) {
    const MCResult mc = mc_average(problem, ctx, s, N, derive_seed(seed, {purpose::sample, 0, static_cast<std::uint64_t>(s)}), workers);
    t.variance.push_back(mc.variance);
    t.samples.push_back(N);
    t.bound.push_back(static_cast<double>(n) / static_cast<double>(s - n - 1) * res * res);
    xs.push_back(std::log2(static_cast<double>(s)));
    if (family.kind == SketchKind::gaussian && !(mc.variance <= 1.2 * t.bound.back())) {
      t.within_bound = false;
    }
  }
  if (sizes.size() >= 3) t.fit = fit_slope(xs, t.variance);
  return t;
}

}  // namespace mlsas
