#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "mlsas/diagnostics.hpp"
#include "mlsas/errors.hpp"
#include "mlsas/estimators.hpp"
#include "mlsas/linalg.hpp"
#include "mlsas/problems.hpp"
#include "mlsas/sketch.hpp"

#include <cmath>

using namespace mlsas;
using namespace testing;

namespace {

LSProblem make_problem(Index m, Index n, double noise, std::uint64_t seed = 0) {
  ProblemSpec spec;
  spec.m = m;
  spec.n = n;
  spec.noise = noise;
  spec.seed = seed;
  return generate(spec);
}

LevelDelta fake_delta(int level, const Vector& dx) {
  LevelDelta d;
  d.level = level;
  d.delta_x = dx;
  d.fine_x = dx;
  d.cost = Flops::whole(10);
  return d;
}

}  // namespace

TEST_CASE("level statistics") {
  const LSProblem p = make_problem(200, 3, 0.1);
  std::mt19937_64 gen(1);
  SUBCASE("identical samples") {
    const Vector dx = randn(3, gen);
    const LevelStats st = level_stats({fake_delta(1, dx), fake_delta(1, dx)}, p);
    CHECK(std::abs(st.V_ell) <= 1e-12 * st.alpha);
    CHECK(st.N == 2);
  }
  SUBCASE("two-point symmetric distribution") {
    const Vector d = randn(3, gen);
    const double v2 = (p.a() * d).squaredNorm();
    for (Index N : {2, 10, 51}) {
      std::vector<LevelDelta> s;
      for (Index i = 0; i < N; ++i) s.push_back(fake_delta(2, (i % 2 ? -1.0 : 1.0) * d));
      const LevelStats st = level_stats(s, p);
      const double mean = (N % 2) ? 1.0 / double(N) : 0.0;
      CHECK(st.alpha == doctest::Approx(v2).epsilon(1e-12));
      CHECK(st.beta_of_delta == doctest::Approx(mean * mean * v2).epsilon(1e-12));
      CHECK(st.V_ell == doctest::Approx((1 - mean * mean) * v2 * double(N) / double(N - 1)).epsilon(1e-12));
    }
  }
  SUBCASE("bookkeeping identities") {
    std::vector<LevelDelta> s;
    for (int i = 0; i < 40; ++i) s.push_back(fake_delta(1, randn(3, gen)));
    const LevelStats st = level_stats(s, p);
    CHECK(st.V_plugin == st.alpha - st.beta_of_delta);
    CHECK(st.V_ell == doctest::Approx(40.0 / 39.0 * st.V_plugin).epsilon(1e-15));
    CHECK(st.C_ell == doctest::Approx(10.0));
    std::vector<Vector> xs;
    for (const auto& d : s) xs.push_back(d.delta_x);
    CHECK(total_variance(xs, p) == doctest::Approx(st.V_ell).epsilon(1e-12));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(level_stats({fake_delta(1, Vector::Ones(3))}, p), TooFewSamples);
    CHECK_THROWS_AS(level_stats({fake_delta(1, Vector::Ones(3)), fake_delta(2, Vector::Ones(3))}, p), InvalidSpec);
  }
}

TEST_CASE("factor decomposition") {
  const LSProblem p = make_problem(128, 4, 0.1, 2);
  SUBCASE("duplicate halves") {
    const auto ctx = SketchContext::create(SketchFamily::parse("uniform"), p, 1);
    std::vector<Index> rows;
    for (int rep = 0; rep < 2; ++rep)
      for (Index k = 0; k < 16; ++k) rows.push_back((7 * k + 3) % 128);
    const auto draws = SketchDraws::explicit_rows(ctx, rows);
    const SketchOperator sa(draws, 0, 16), sb(draws, 16, 16);
    const LevelDelta d = delta_from_halves(p, sa, sb, DeltaMode::antithetic, 1);
    const FactorNorms f = factor_decomposition(p, sa, sb, d);
    CHECK(f.h_diff_sq <= 1e-24);
    CHECK(f.x_ab_diff_sq <= 1e-24);
    CHECK(f.a_delta_norm <= 1e-12);
  }
  SUBCASE("exact embedding halves") {
    const auto ctx = SketchContext::create(SketchFamily::parse("uniform_wor"), p, 1);
    std::vector<Index> rows;
    for (int rep = 0; rep < 2; ++rep)
      for (Index k = 0; k < 128; ++k) rows.push_back(k);
    const auto draws = SketchDraws::explicit_rows(ctx, rows);
    const SketchOperator sa(draws, 0, 128), sb(draws, 128, 128);
    const LevelDelta d = delta_from_halves(p, sa, sb, DeltaMode::antithetic, 1);
    const FactorNorms f = factor_decomposition(p, sa, sb, d);
    CHECK(f.h_inv_sq == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.h_b_sq == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.x_ab_diff_sq <= 1e-24);
  }
  SUBCASE("reconstruction for every family and both modes") {
    for (const char* name : {"gaussian", "uniform", "uniform_wor", "srht", "srtt", "leverage",
                             "leverage_aug", "leverage_weighted", "leverage_aug_weighted"}) {
      CAPTURE(name);
      const auto ctx = SketchContext::create(SketchFamily::parse(name), p, 4);
      for (DeltaMode mode : {DeltaMode::antithetic, DeltaMode::plain}) {
        for (std::uint64_t seed = 0; seed < 4; ++seed) {
          const NestedSketch ns = make_nested(ctx, 2, 8, seed);
          const LevelDelta d = sample_delta(p, ns, 2, mode);
          const FactorNorms f = factor_decomposition(d, p, ns, 2);
          CHECK(f.reconstruction_error <= 1e-9);
          CHECK(f.h_inv_sq > 0.0);
        }
      }
    }
  }
  SUBCASE("mean of records") {
    FactorNorms a, b;
    a.h_diff_sq = 1.0;
    b.h_diff_sq = 3.0;
    a.reconstruction_error = 1e-13;
    b.reconstruction_error = 1e-11;
    const FactorNorms m = mean_factors({a, b});
    CHECK(m.h_diff_sq == 2.0);
    CHECK(m.reconstruction_error == 1e-11);
  }
  SUBCASE("needs the SVD") {
    const LSProblem bare(p.a(), p.b());
    const auto ctx = SketchContext::create(SketchFamily::parse("uniform"), bare.rows(), 1);
    const NestedSketch ns = make_nested(ctx, 1, 8, 1);
    const LevelDelta d = sample_delta(bare, ns, 1, DeltaMode::antithetic);
    CHECK_THROWS_AS(factor_decomposition(d, bare, ns, 1), MissingSVD);
  }
}

TEST_CASE("slope fitting") {
  std::vector<double> xs, ys;
  for (int l = 0; l <= 5; ++l) {
    xs.push_back(l);
    ys.push_back(std::pow(4.0, -l));
  }
  SlopeFit f = fit_slope(xs, ys);
  CHECK(std::abs(f.slope + 2.0) <= 1e-12);
  CHECK(f.r_squared == doctest::Approx(1.0));
  for (auto& y : ys) y = std::sqrt(y) * 3.0;
  f = fit_slope(xs, ys);
  CHECK(std::abs(f.slope + 1.0) <= 1e-12);
  CHECK(std::abs(f.intercept - std::log2(3.0)) <= 1e-12);

  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> j;
    for (int l = 0; l <= 5; ++l) j.push_back(std::pow(4.0, -l) * (1 + 0.1 * u(gen)));
    f = fit_slope(xs, j);
    CHECK(f.slope >= -2.2);
    CHECK(f.slope <= -1.8);
    CHECK(f.r_squared >= 0.0);
    CHECK(f.r_squared <= 1.0);
  }
  CHECK_THROWS_AS(fit_slope({0, 1, 2}, {1.0, 0.0, 1.0}), NonPositiveValue);
  CHECK_THROWS_AS(fit_slope({0, 1}, {1.0, 2.0}), Error);
}

TEST_CASE("cross-level correlation") {
  const LSProblem p = make_problem(100, 3, 0.1);
  std::mt19937_64 gen(3);
  const Index N = 4000;
  std::vector<Vector> x, y;
  for (Index i = 0; i < N; ++i) {
    x.push_back(randn(3, gen));
    y.push_back(randn(3, gen));
  }
  const Correlation indep = cross_level_correlation(x, y, p);
  CHECK(std::abs(indep.rho_x) <= 3.0 / std::sqrt(double(N)));
  CHECK(std::abs(indep.rho_ax) <= 3.0 / std::sqrt(double(N)));
  const Correlation same = cross_level_correlation(x, x, p);
  CHECK(same.rho_x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(same.rho_ax == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<Vector> neg;
  for (const auto& v : x) neg.push_back(-2.0 * v);
  CHECK(cross_level_correlation(x, neg, p).rho_x == doctest::Approx(-1.0).epsilon(1e-12));

  // dense trace-convention oracle
  Matrix X(3, 50), Y(3, 50);
  for (Index i = 0; i < 50; ++i) {
    X.col(i) = x[static_cast<std::size_t>(i)];
    Y.col(i) = x[static_cast<std::size_t>(i)] + y[static_cast<std::size_t>(i)];
  }
  const Matrix cov_xy = (X.colwise() - X.rowwise().mean()) * (Y.colwise() - Y.rowwise().mean()).transpose();
  const Matrix cov_xx = (X.colwise() - X.rowwise().mean()) * (X.colwise() - X.rowwise().mean()).transpose();
  const Matrix cov_yy = (Y.colwise() - Y.rowwise().mean()) * (Y.colwise() - Y.rowwise().mean()).transpose();
  const double rho = cov_xy.trace() / std::sqrt(cov_xx.trace() * cov_yy.trace());
  std::vector<Vector> xs(x.begin(), x.begin() + 50), ys;
  for (Index i = 0; i < 50; ++i) ys.push_back(Y.col(i));
  CHECK(cross_level_correlation(xs, ys, p).rho_x == doctest::Approx(rho).epsilon(1e-12));

  CHECK_THROWS_AS(cross_level_correlation(std::vector<Vector>(x.begin(), x.begin() + 29),
                                          std::vector<Vector>(y.begin(), y.begin() + 29), p),
                  TooFewSamples);
}

TEST_CASE("level cost models") {
  const Index n = 10, s0 = 40;
  const auto classic = level_costs(CostVariant::classic, 3, n, s0);
  const auto merged = level_costs(CostVariant::merged, 3, n, s0);
  const auto recycled = level_costs(CostVariant::recycled, 3, n, s0);
  CHECK(classic[0] == Flops::from_thirds(3 * 2 * 40 * 100 - 2 * 1000));
  CHECK(merged[0] == classic[0]);
  CHECK(recycled[0] == classic[0]);
  CHECK(classic[2] == Flops::whole(4 * 160 * 100 - 2 * 1000));
  CHECK(merged[2] == Flops::whole(2 * 160 * 100 + 2 * 1000));
  CHECK(recycled[1] == Flops::whole(2 * 80 * 100 + 2 * 1000));
  CHECK(recycled[2] == Flops::from_thirds(10 * 1000));
  CHECK(recycled[3] == recycled[2]);
  CHECK(mc_sample_cost(3, n, s0) == householder_cost(320, n));
  CHECK(to_string(parse_cost_variant("recycled")) == "recycled");
  CHECK_THROWS(parse_cost_variant("cheap"));
}

TEST_CASE("cost comparison") {
  SUBCASE("totals recompute from the fields") {
    const CostReport r = cost_compare({3.0, 0.5, 0.1}, {10.0, 40.0, 90.0}, 0.2, 500.0, 0.01, CostVariant::merged);
    double sum = 0.0;
    for (std::size_t l = 0; l < r.V.size(); ++l) {
      CHECK(r.sqrt_vc[l] == std::sqrt(r.V[l] * r.C[l]));
      sum += r.sqrt_vc[l];
    }
    CHECK(r.mlsas_total == (1.0 / (r.eps * r.eps)) * sum * sum);
    CHECK(r.mc_total == (1.0 / (r.eps * r.eps)) * r.mc_V_L * r.mc_C_L);
    CHECK(r.mlsas_more_expensive == (r.mlsas_total > r.mc_total));
  }
  SUBCASE("single level is Monte Carlo") {
    const CostReport r = cost_compare({2.0}, {7.0}, 2.0, 7.0, 0.1, CostVariant::classic);
    CHECK(r.mlsas_total == doctest::Approx(r.mc_total).epsilon(1e-15));
    CHECK(r.verdict == "MLSAS_total <= MC_total");
  }
  SUBCASE("closed-form chain") {
    const double V0 = 1.7, n = 50;
    for (int L = 2; L <= 8; ++L) {
      for (auto c : {std::array<double, 3>{7.0, 18.0, 3.0}, std::array<double, 3>{22.0 / 3.0, 18.0, 10.0 / 3.0}}) {
        double sum = 0.0;
        for (int l = 0; l <= L; ++l) {
          const double cl = (l == 0 ? c[0] : l == 1 ? c[1] : c[2]) * n * n * n;
          sum += std::sqrt(std::pow(4.0, -l) * V0 * cl);
        }
        const double direct = sum * sum;
        CHECK(analytic_mlsas_cost(V0, n, L, c[0], c[1], c[2]) == doctest::Approx(direct).epsilon(1e-12));
        const double mc = std::pow(2.0, -L) * V0 * 8.0 * std::pow(2.0, L) * n * n * n;
        CHECK(direct > mc);
      }
    }
    CHECK(analytic_mlsas_cost(V0, n, 0, 8.0, 18.0, 3.0) == doctest::Approx(8.0 * V0 * n * n * n));
  }
  CHECK_THROWS_AS(cost_compare({1.0}, {0.0}, 1.0, 1.0, 0.1, CostVariant::merged), NonPositiveValue);
}

TEST_CASE("Monte Carlo variance trend") {
  SUBCASE("gaussian") {
    const LSProblem p = make_problem(256, 4, 0.1, 5);
    const auto t = mc_variance_trend(p, SketchFamily::parse("gaussian"), {16, 32, 64, 128}, 400, 3, 4);
    MESSAGE("gaussian slope " << t.fit.slope);
    CHECK(t.fit.slope >= -1.3);
    CHECK(t.fit.slope <= -0.7);
    CHECK(t.within_bound);
  }
  SUBCASE("loose bound near s = n + 2") {
    const LSProblem p = make_problem(256, 4, 0.1, 5);
    const auto t = mc_variance_trend(p, SketchFamily::parse("gaussian"), {6, 7}, 400, 3, 4);
    CHECK(t.bound[0] == doctest::Approx(4.0 * std::pow(*p.residual_star(), 2)));
    CHECK(t.variance[0] <= t.bound[0]);
  }
  SUBCASE("uniform on an incoherent problem") {
    const LSProblem p = make_problem(1600, 10, 0.1, 5);
    const auto t = mc_variance_trend(p, SketchFamily::parse("uniform"), {40, 80, 160, 320}, 400, 3, 4);
    MESSAGE("uniform slope " << t.fit.slope);
    CHECK(t.fit.slope >= -1.4);
    CHECK(t.fit.slope <= -0.6);
  }
  SUBCASE("argument checks") {
    const LSProblem p = make_problem(64, 4, 0.1, 5);
    CHECK_THROWS_AS(mc_variance_trend(p, SketchFamily::parse("gaussian"), {5, 10}, 10, 1), BadDimension);
    CHECK_THROWS_AS(mc_variance_trend(p, SketchFamily::parse("gaussian"), {20, 10}, 10, 1), BadDimension);
  }
}
