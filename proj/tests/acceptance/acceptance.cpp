#include "mlsas/diagnostics.hpp"
#include "mlsas/errors.hpp"
#include "mlsas/estimators.hpp"
#include "mlsas/linalg.hpp"
#include "mlsas/parallel.hpp"
#include "mlsas/problems.hpp"
#include "mlsas/rng.hpp"
#include "mlsas/sketch.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace mlsas;

namespace {

int failures = 0;
const int kWorkers = default_workers();
bool sample_cost_exact = false;
double fine_merge_vs_direct = 1.0;

void report(const std::string& id, const std::string& title, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %s: %s | %s\n", pass ? "PASS" : "FAIL", id.c_str(), title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void info(const std::string& text) {
  std::printf("       info: %s\n", text.c_str());
  std::fflush(stdout);
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

bool in_range(double v, double lo, double hi) { return v >= lo && v <= hi; }

LSProblem paper_problem() {
  ProblemSpec spec;  // m = 6400, n = 50, cond 1e2, noise 1e-3
  return generate(spec);
}

LSProblem small_problem(Index m, Index n, double noise, std::uint64_t seed) {
  ProblemSpec spec;
  spec.m = m;
  spec.n = n;
  spec.noise = noise;
  spec.seed = seed;
  return generate(spec);
}

std::vector<double> axis(int first, int last) {
  std::vector<double> xs;
  for (int l = first; l <= last; ++l) xs.push_back(l);
  return xs;
}

std::vector<double> tail(const std::vector<double>& v, int first) {
  return {v.begin() + first, v.end()};
}

Matrix gram(const SketchOperator& op, const Matrix& u) {
  const Matrix su = sketch_rows(op, u);
  return su.transpose() * su;
}

Vector dense_solve(const Matrix& a, const Vector& b) { return a.colPivHouseholderQr().solve(b); }

// ------------------------------------------------------------------ 1 and 4
void variance_slopes(const LSProblem& p) {
  const int L = 5;
  const Index N = 1000;
  const Index base = default_base_rows(p.cols());
  const auto ctx = SketchContext::create(SketchFamily::parse("uniform"), p, 0);
  std::vector<double> va, vp, vm;
  bool beta_small = true;
  bool cost_exact = true;
  double merge_vs_direct = 0.0;
  const Index n = p.cols();
  for (int l = 0; l <= L; ++l) {
    const auto anti = sample_level(p, ctx, l, base, DeltaMode::antithetic, 0, 0, N, kWorkers);
    std::vector<Vector> dx_a, dx_p, x_fine;
    for (const auto& d : anti) {
      dx_a.push_back(d.delta_x);
      dx_p.push_back(l == 0 ? d.delta_x : Vector(d.fine_x - d.coarse_parts[0]));
      x_fine.push_back(d.fine_x);
      if (l >= 1 && d.cost != Flops::whole(2 * d.sketch_rows * n * n + 2 * n * n * n)) cost_exact = false;
    }
    va.push_back(total_variance(dx_a, p));
    vp.push_back(total_variance(dx_p, p));
    vm.push_back(total_variance(x_fine, p));
    if (l >= 1) {
      const LevelStats st = level_stats(anti, p);
      if (!(st.beta_of_delta <= 0.1 * st.alpha)) beta_small = false;
      // direct stacked solve on the same halves
      for (Index i = 0; i < 20; ++i) {
        const auto nested = sample_nested(ctx, l, base, 0, anti[static_cast<std::size_t>(i)].stream);
        const LevelDelta direct = sample_delta(p, nested, l, DeltaMode::plain);
        merge_vs_direct = std::max(merge_vs_direct, (direct.fine_x - anti[static_cast<std::size_t>(i)].fine_x).norm() /
                                                        direct.fine_x.norm());
      }
    }
  }
  std::ostringstream vs;
  for (int l = 0; l <= L; ++l) vs << " " << l << ":" << fmt(va[l], 3) << "/" << fmt(vp[l], 3) << "/" << fmt(vm[l], 3);
  info("V per level (antithetic/plain/mc):" + vs.str());

  const double sa = fit_slope(axis(1, L), tail(va, 1)).slope;
  const double sp = fit_slope(axis(1, L), tail(vp, 1)).slope;
  const double sm = fit_slope(axis(1, L), tail(vm, 1)).slope;
  info("slopes over levels 0-5: antithetic " + fmt(fit_slope(axis(0, L), va).slope) + ", plain " +
       fmt(fit_slope(axis(0, L), vp).slope) + ", mc " + fmt(fit_slope(axis(0, L), vm).slope));
  info(std::string("beta_of_delta <= 0.1 alpha at levels 1-5: ") + (beta_small ? "yes" : "no"));
  const bool pass = in_range(sa, -2.4, -1.6) && in_range(sp, -1.4, -0.6) && in_range(sm, -1.4, -0.6);
  report("1", "variance slopes, m=6400 n=50, 1000 samples/level, fit over levels 1-5", pass,
         "antithetic " + fmt(sa) + " in [-2.4,-1.6], plain " + fmt(sp) + " in [-1.4,-0.6], mc " + fmt(sm) +
             " in [-1.4,-0.6]");

  sample_cost_exact = cost_exact;
  fine_merge_vs_direct = merge_vs_direct;
}

void merge_checks() {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> pick_n(1, 40);
  double worst = 0.0;
  bool merge_cost_ok = true;
  for (int t = 0; t < 1000; ++t) {
    const Index nn = pick_n(gen);
    const Index s = 2 * nn + pick_n(gen);
    auto rand_matrix = [&](Index r, Index c) {
      Matrix m(r, c);
      for (Index j = 0; j < c; ++j)
        for (Index i = 0; i < r; ++i) m(i, j) = normal(gen);
      return m;
    };
    const Matrix a1 = rand_matrix(s, nn), a2 = rand_matrix(s, nn);
    const Vector b1 = rand_matrix(s, 1).col(0), b2 = rand_matrix(s, 1).col(0);
    const QRSolution q1 = qr_solve(a1, b1), q2 = qr_solve(a2, b2);
    const MergeSolution merged = merge_solve(q1.factors.r(), q2.factors.r(), q1.qt_b, q2.qt_b);
    Matrix stacked(2 * s, nn);
    stacked << a1, a2;
    Vector rhs(2 * s);
    rhs << b1, b2;
    const Vector direct = dense_solve(stacked, rhs);
    worst = std::max(worst, (merged.x - direct).norm() / direct.norm());
    if (2 * householder_cost(s, nn) + merged.cost !=
        Flops::whole(2 * (2 * s) * nn * nn + 2 * nn * nn * nn)) {
      merge_cost_ok = false;
    }
  }
  report("4", "QR merge equals stacked solve; antithetic sample cost 2 s n^2 + 2 n^3", worst <= 1e-12 && sample_cost_exact && merge_cost_ok && fine_merge_vs_direct <= 1e-12,
         "max rel diff over 1000 random instances " + fmt(worst, 3) + ", merge vs direct fine on m=6400 samples " +
             fmt(fine_merge_vs_direct, 3) + ", cost model exact on every sample: " + (sample_cost_exact && merge_cost_ok ? "yes" : "no"));
}

void quick_variance_slopes() {
  ProblemSpec spec;
  spec.m = 1600;
  spec.n = 25;
  const LSProblem p = generate(spec);
  const auto t0 = std::chrono::steady_clock::now();
  const auto ctx = SketchContext::create(SketchFamily::parse("uniform"), p, 0);
  std::vector<double> va, vp, vm;
  for (int l = 0; l <= 5; ++l) {
    const auto anti = sample_level(p, ctx, l, 2 * p.cols(), DeltaMode::antithetic, 0, 0, 200, kWorkers);
    std::vector<Vector> a, b, c;
    for (const auto& d : anti) {
      a.push_back(d.delta_x);
      b.push_back(l == 0 ? d.delta_x : Vector(d.fine_x - d.coarse_parts[0]));
      c.push_back(d.fine_x);
    }
    va.push_back(total_variance(a, p));
    vp.push_back(total_variance(b, p));
    vm.push_back(total_variance(c, p));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double sa = fit_slope(axis(1, 5), tail(va, 1)).slope;
  const double sp = fit_slope(axis(1, 5), tail(vp, 1)).slope;
  const double sm = fit_slope(axis(1, 5), tail(vm, 1)).slope;
  const bool pass = in_range(sa, -2.9, -1.1) && in_range(sp, -1.9, -0.1) && in_range(sm, -1.9, -0.1) && secs < 30;
  report("1-quick", "quick variant m=1600 n=25, 200 samples/level, tolerances widened by 0.5", pass,
         "antithetic " + fmt(sa) + ", plain " + fmt(sp) + ", mc " + fmt(sm) + ", " + fmt(secs, 3) + " s");
}

// ------------------------------------------------------------------ 2
void factor_slopes(const LSProblem& p) {
  const int L = 5;
  const Index base = default_base_rows(p.cols());
  const auto ctx = SketchContext::create(SketchFamily::parse("uniform"), p, 0);
  std::vector<double> h_inv, h_diff, h_b, x_diff;
  double worst = 0.0;
  for (int l = 1; l <= L; ++l) {
    const auto samples = sample_level(p, ctx, l, base, DeltaMode::antithetic, 0, 0, 100, kWorkers);
    std::vector<FactorNorms> rec(samples.size());
    parallel_for(static_cast<Index>(samples.size()), kWorkers, [&](Index i) {
      const auto& d = samples[static_cast<std::size_t>(i)];
      rec[static_cast<std::size_t>(i)] = factor_decomposition(d, p, sample_nested(ctx, l, base, 0, d.stream), l);
    });
    const FactorNorms m = mean_factors(rec);
    h_inv.push_back(m.h_inv_sq);
    h_diff.push_back(m.h_diff_sq);
    h_b.push_back(m.h_b_sq);
    x_diff.push_back(m.x_ab_diff_sq);
    worst = std::max(worst, m.reconstruction_error);
  }
  const auto xs = axis(1, L);
  const double s_diff = fit_slope(xs, h_diff).slope;
  const double s_x = fit_slope(xs, x_diff).slope;
  const double s_inv = fit_slope(xs, h_inv).slope;
  const double s_b = fit_slope(xs, h_b).slope;
  std::ostringstream v;
  for (int l = 1; l <= L; ++l) {
    v << " " << l << ":" << fmt(h_inv[l - 1], 3) << "/" << fmt(h_diff[l - 1], 3) << "/" << fmt(h_b[l - 1], 3) << "/"
      << fmt(x_diff[l - 1], 3);
  }
  info("mean factors per level (h_inv/h_diff/h_b/x_diff):" + v.str());
  info("max factor reconstruction error " + fmt(worst, 3));
  const bool pass = in_range(s_diff, -1.35, -0.65) && in_range(s_x, -1.35, -0.65) && in_range(s_inv, -0.3, 0.3) &&
                    in_range(s_b, -0.3, 0.3);
  report("2", "factor slopes, 100 samples/level, levels 1-5", pass,
         "||Ha-Hb||^2 " + fmt(s_diff) + ", ||xa-xb||^2 " + fmt(s_x) + " in [-1.35,-0.65]; ||H^-1||^2 " + fmt(s_inv) +
             ", ||Hb||^2 " + fmt(s_b) + " in [-0.3,0.3]");
}

// ------------------------------------------------------------------ 3
void identities() {
  const LSProblem p = small_problem(512, 8, 0.1, 11);
  Eigen::BDCSVD<Matrix> svd(p.a(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Matrix u = svd.matrixU();
  const Matrix sv = svd.singularValues().asDiagonal() * svd.matrixV().transpose();
  const char* families[] = {"gaussian", "uniform", "uniform_wor", "srht", "srtt",
                            "leverage", "leverage_aug", "leverage_weighted", "leverage_aug_weighted"};
  double worst_a = 0.0, worst_p = 0.0, worst_zero = 0.0;
  int count = 0;
  std::uint64_t seed = 0;
  for (const char* name : families) {
    const auto ctx = SketchContext::create(SketchFamily::parse(name), p, 5);
    for (int l = 1; l <= 4; ++l) {
      for (int k = 0; k < 28; ++k, ++seed, ++count) {
        const NestedSketch ns = make_nested(ctx, l, 2 * p.cols(), derive_seed(99, {purpose::sample, 0, seed}));
        const auto [sa, sb] = ns.split(l);
        const Matrix ha = gram(sa, u), hb = gram(sb, u);
        const Eigen::FullPivLU<Matrix> hsum(ha + hb);
        const SketchedSystem ya = apply(sa, p.a(), p.b()), yb = apply(sb, p.a(), p.b());
        const Vector xa = dense_solve(ya.sa, ya.sb), xb = dense_solve(yb.sa, yb.sb);

        const Vector got_a = p.a() * sample_delta(p, ns, l, DeltaMode::antithetic).delta_x;
        const Vector want_a = 0.5 * u * hsum.solve((ha - hb) * sv * (xa - xb));
        worst_a = std::max(worst_a, (got_a - want_a).norm() / got_a.norm());

        const Vector got_p = p.a() * sample_delta(p, ns, l, DeltaMode::plain).delta_x;
        const Vector want_p = u * hsum.solve(hb * sv * (xb - xa));
        worst_p = std::max(worst_p, (got_p - want_p).norm() / got_p.norm());
      }
      if (SketchFamily::parse(name).kind != SketchKind::gaussian) {
        const SketchOperator one = draw_operator(ctx, p.cols() << l, derive_seed(7, {purpose::sample, 1, seed}));
        std::vector<Index> rows;
        for (int rep = 0; rep < 2; ++rep)
          for (Index r = 0; r < one.rows(); ++r) rows.push_back(one.selected_row(r));
        const auto draws = SketchDraws::explicit_rows(ctx, rows);
        const SketchOperator s1(draws, 0, one.rows()), s2(draws, one.rows(), one.rows());
        const LevelDelta d = delta_from_halves(p, s1, s2, DeltaMode::antithetic, l);
        worst_zero = std::max(worst_zero, d.delta_x.norm() / d.fine_x.norm());
      }
    }
  }
  const bool pass = worst_a <= 1e-9 && worst_p <= 1e-9 && worst_zero <= 1e-12;
  report("3", "factored identities for the level difference", pass,
         std::to_string(count) + " samples over 9 families, levels 1-4: antithetic max rel err " + fmt(worst_a, 3) +
             ", plain " + fmt(worst_p, 3) + "; duplicated halves |dx|/|x| " + fmt(worst_zero, 3));
}

// ------------------------------------------------------------------ 5
void enumeration() {
  const Index m = 8, s = 4;
  const LSProblem p = small_problem(m, 2, 0.3, 21);
  const auto ctx = SketchContext::create(SketchFamily::parse("uniform"), p, 1);
  // exhaustive oracle with explicit selection matrices
  Vector mean = Vector::Zero(m);
  std::vector<Vector> outs;
  Index excluded = 0;
  std::vector<Index> t(s, 0);
  for (Index code = 0; code < 4096; ++code) {
    Index c = code;
    for (Index k = 0; k < s; ++k, c /= m) t[static_cast<std::size_t>(k)] = c % m;
    Matrix sa(s, 2);
    Vector sb(s);
    for (Index k = 0; k < s; ++k) {
      sa.row(k) = p.a().row(t[static_cast<std::size_t>(k)]);
      sb(k) = p.b()(t[static_cast<std::size_t>(k)]);
    }
    const Eigen::ColPivHouseholderQR<Matrix> qr(sa);
    if (qr.rank() < 2) {
      ++excluded;
      continue;
    }
    outs.push_back(p.a() * qr.solve(sb));
    mean += outs.back();
  }
  mean /= static_cast<double>(outs.size());
  double var = 0.0;
  for (const auto& v : outs) var += (v - mean).squaredNorm();
  var /= static_cast<double>(outs.size());

  // sampled side through the library, rejecting rank-deficient draws
  const Index draws = 100000;
  std::vector<Vector> sampled(static_cast<std::size_t>(draws));
  std::vector<char> kept(static_cast<std::size_t>(draws), 0);
  parallel_for(draws, kWorkers, [&](Index i) {
    try {
      const SketchOperator op = draw_operator(ctx, s, derive_seed(3, {purpose::sample, 0, static_cast<std::uint64_t>(i)}));
      sampled[static_cast<std::size_t>(i)] = p.a() * sas_solve(p, op).x;
      kept[static_cast<std::size_t>(i)] = 1;
    } catch (const RankDeficient&) {
    }
  });
  Vector smean = Vector::Zero(m);
  Index k = 0;
  for (Index i = 0; i < draws; ++i)
    if (kept[static_cast<std::size_t>(i)]) {
      smean += sampled[static_cast<std::size_t>(i)];
      ++k;
    }
  smean /= static_cast<double>(k);
  Vector comp_var = Vector::Zero(m);
  std::vector<double> dev;
  for (Index i = 0; i < draws; ++i) {
    if (!kept[static_cast<std::size_t>(i)]) continue;
    const Vector d = sampled[static_cast<std::size_t>(i)] - smean;
    comp_var += d.cwiseProduct(d);
    dev.push_back(d.squaredNorm());
  }
  comp_var /= static_cast<double>(k - 1);
  double svar = 0.0;
  for (double d : dev) svar += d;
  svar /= static_cast<double>(k - 1);
  double dvar = 0.0;
  for (double d : dev) dvar += (d - svar) * (d - svar);
  const double var_se = std::sqrt(dvar / static_cast<double>(k - 1) / static_cast<double>(k));

  double worst_z = 0.0;
  for (Index i = 0; i < m; ++i) {
    worst_z = std::max(worst_z, std::abs(smean(i) - mean(i)) / std::sqrt(comp_var(i) / static_cast<double>(k)));
  }
  const double var_z = std::abs(svar - var) / var_se;
  const bool pass = worst_z <= 3.0 && var_z <= 3.0;
  report("5", "exhaustive enumeration m=8 n=2 s=4 vs 1e5 draws", pass,
         "excluded " + std::to_string(excluded) + "/4096 tuples (" + fmt(100.0 * double(excluded) / 4096.0, 3) +
             "%), sampled rejection rate " + fmt(100.0 * double(draws - k) / double(draws), 3) +
             "%; max |z| of E[A x] components " + fmt(worst_z, 3) + ", variance z " + fmt(var_z, 3) + " (var " +
             fmt(var, 5) + " vs " + fmt(svar, 5) + ")");
}

// ------------------------------------------------------------------ 6
void cost_verdict(const LSProblem& p) {
  const int L = 5;
  const Index n = p.cols();
  const Index base = 4 * n;
  const auto ctx = SketchContext::create(SketchFamily::parse("uniform"), p, 0);
  std::vector<double> V;
  double mc_V = 0.0;
  for (int l = 0; l <= L; ++l) {
    const auto samples = sample_level(p, ctx, l, base, DeltaMode::antithetic, 0, 0, 400, kWorkers);
    V.push_back(level_stats(samples, p).V_ell);
    if (l == L) {
      std::vector<Vector> xs;
      for (const auto& d : samples) xs.push_back(d.fine_x);
      mc_V = total_variance(xs, p);
    }
  }
  const double n3 = double(n) * n * n;
  std::vector<double> C;
  for (int l = 0; l <= L; ++l) C.push_back((l == 0 ? 22.0 / 3.0 : l == 1 ? 18.0 : 10.0 / 3.0) * n3);
  const auto model = level_costs(CostVariant::recycled, L, n, base);
  bool model_match = true;
  for (int l = 0; l <= L; ++l) model_match = model_match && std::abs(model[l].value() - C[l]) <= 1e-9 * C[l];
  const double mc_C = mc_sample_cost(L, n, base).value();
  const CostReport r = cost_compare(V, C, mc_V, mc_C, 1.0, CostVariant::recycled);

  // analytic chain: V_l = 4^-l V0, V_L^MC = 2^-L V0, s_0 = 4n
  const double V0 = 1.0;
  bool chain_ok = true;
  double chain_exact = 0.0, chain_rounded = 0.0, mc_analytic = 0.0;
  for (int LL = 2; LL <= 10; ++LL) {
    for (int set = 0; set < 2; ++set) {
      const double c0 = set ? 7.0 : 22.0 / 3.0, c1 = 18.0, c2 = set ? 3.0 : 10.0 / 3.0;
      double sum = 0.0;
      for (int l = 0; l <= LL; ++l) sum += std::sqrt(std::pow(4.0, -l) * V0 * (l == 0 ? c0 : l == 1 ? c1 : c2) * n3);
      const double chain = analytic_mlsas_cost(V0, double(n), LL, c0, c1, c2);
      const double mc = std::pow(2.0, -LL) * V0 * (2.0 * double(base << LL) * double(n) * double(n));
      chain_ok = chain_ok && std::abs(chain - sum * sum) <= 1e-12 * chain && std::abs(mc - 8.0 * n3 * V0) <= 1e-12 * mc &&
                 chain > mc;
      if (LL == L) (set ? chain_rounded : chain_exact) = chain;
      mc_analytic = mc;
    }
  }
  const bool pass = r.mlsas_more_expensive && chain_ok && model_match;
  report("6", "cost verdict with the recycled cost model", pass,
         "measured: eps^2 C_MLSAS " + fmt(r.mlsas_total / n3, 5) + " n^3 vs eps^2 C_MC " + fmt(r.mc_total / n3, 5) +
             " n^3 (" + r.verdict + "); analytic L=5: " + fmt(chain_exact / n3 / V0, 5) + " n^3 V0 (22/3,18,10/3), " +
             fmt(chain_rounded / n3 / V0, 5) + " n^3 V0 (7,18,3) vs MC " + fmt(mc_analytic / n3 / V0, 5) +
             " n^3 V0; chain checks to 1e-12 for L=2..10: " + (chain_ok ? "yes" : "no"));
}

// ------------------------------------------------------------------ 7
void correlations(const LSProblem& p) {
  const Index N0 = 16000;
  const auto ctx = SketchContext::create(SketchFamily::parse("uniform"), p, 0);
  const RecycledSamples rs = recycled_sampler(p, ctx, {N0, N0, N0 / 4, N0 / 8}, default_base_rows(p.cols()), 0, kWorkers);
  bool pass = audit_usage(rs);
  std::string detail = std::string("usage audit ") + (pass ? "pass" : "FAIL");
  for (int lo = 0; lo <= 1; ++lo) {
    const auto [x, y] = recycled_pairs(rs, lo);
    const Correlation c = cross_level_correlation(x, y, p);
    pass = pass && c.pairs >= 500 && std::abs(c.rho_x) <= 0.05 && std::abs(c.rho_ax) <= 0.05;
    detail += "; rho(" + std::to_string(lo) + "," + std::to_string(lo + 2) + ") dx " + fmt(c.rho_x) + ", A dx " +
              fmt(c.rho_ax) + " over " + std::to_string(c.pairs) + " pairs (noise ~" +
              fmt(1.0 / std::sqrt(double(c.pairs)), 2) + ")";
  }
  report("7", "recycled cross-level correlations |rho| <= 0.05", pass, detail);
}

// ------------------------------------------------------------------ 8
void allocation() {
  const auto N = optimal_allocation({4.0, 1.0}, {1.0, 4.0}, 1.0);
  bool pass = N == std::vector<Index>{8, 2};
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int levels = 1 + static_cast<int>(u(gen) * 8);
    std::vector<double> V, C;
    for (int l = 0; l < levels; ++l) {
      V.push_back(std::exp(8.0 * (u(gen) - 0.5)));
      C.push_back(std::exp(8.0 * (u(gen) - 0.5)));
    }
    const double eps = std::exp(4.0 * (u(gen) - 0.8));
    const auto n = optimal_allocation(V, C, eps);
    double sum = 0.0;
    for (int l = 0; l < levels; ++l) sum += V[l] / double(n[l]);
    worst = std::max(worst, sum / (eps * eps));
  }
  pass = pass && worst <= 1.0;
  report("8", "allocation formula", pass,
         "V=(4,1) C=(1,4) eps=1 -> N=(" + std::to_string(N[0]) + "," + std::to_string(N[1]) +
             "); max sum V/N / eps^2 over 100 random instances " + fmt(worst, 6));
}

// ------------------------------------------------------------------ 9
void distortion_trend() {
  const Index m = 512, n = 4;
  const Matrix u = haar_orthonormal(m, n, 17, 901);
  std::vector<double> xs, med;
  for (Index mult : {16, 32, 64, 128, 256}) {
    const Index s = mult * n;
    std::vector<double> d(100);
    parallel_for(100, kWorkers, [&](Index i) {
      d[static_cast<std::size_t>(i)] =
          embedding_distortion(make_operator(SketchFamily::parse("gaussian"), s, m, derive_seed(5, {purpose::sample, 0, static_cast<std::uint64_t>(i)})), u);
    });
    std::nth_element(d.begin(), d.begin() + 50, d.end());
    xs.push_back(std::log2(double(s)));
    med.push_back(d[50]);
  }
  const double slope = fit_slope(xs, med).slope;
  std::ostringstream v;
  for (std::size_t i = 0; i < xs.size(); ++i) v << " s=" << (1 << int(xs[i])) << ":" << fmt(med[i], 3);
  report("9", "gaussian embedding distortion trend", in_range(slope, -0.65, -0.35),
         "median distortion slope " + fmt(slope) + " in [-0.65,-0.35];" + v.str());
}

// ------------------------------------------------------------------ 10
void gaussian_bound() {
  const LSProblem p = small_problem(512, 8, 1e-3, 23);
  const Index n = p.cols();
  const MCTrend t = mc_variance_trend(p, SketchFamily::parse("gaussian"), {4 * n, 8 * n, 16 * n, 32 * n}, 1000, 9, kWorkers);
  std::ostringstream v;
  bool pass = true;
  for (std::size_t i = 0; i < t.sizes.size(); ++i) {
    const double ratio = t.variance[i] / t.bound[i];
    pass = pass && ratio <= 1.2;
    v << " s=" << t.sizes[i] << ":" << fmt(ratio, 3);
  }
  report("10", "gaussian MC variance within 1.2x of n/(s-n-1)||r*||^2", pass,
         "measured/bound ratios" + v.str() + "; slope " + fmt(t.fit.slope));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  std::printf("acceptance run, %d workers\n", kWorkers);
  const LSProblem p = paper_problem();
  variance_slopes(p);
  quick_variance_slopes();
  factor_slopes(p);
  identities();
  merge_checks();
  enumeration();
  cost_verdict(p);
  correlations(p);
  allocation();
  distortion_trend();
  gaussian_bound();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d failing line(s), %.1f s\n", failures, secs);
  return failures == 0 ? 0 : 1;
}
