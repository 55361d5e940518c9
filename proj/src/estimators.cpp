#include "mlsas/estimators.hpp"

#include "mlsas/errors.hpp"
#include "mlsas/linalg.hpp"
#include "mlsas/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace mlsas {

std::string to_string(DeltaMode mode) {
  switch (mode) {
    case DeltaMode::antithetic: return "antithetic";
    case DeltaMode::plain: return "plain";
    case DeltaMode::recycled: return "recycled";
  }
  return "unknown";
}

DeltaMode parse_delta_mode(const std::string& text) {
  if (text == "antithetic") return DeltaMode::antithetic;
  if (text == "plain") return DeltaMode::plain;
  if (text == "recycled") return DeltaMode::recycled;
  throw InvalidSpec("unknown mode '" + text + "'");
}

SASResult sas_solve(const LSProblem& problem, const SketchOperator& op) {
  if (op.source_rows() != problem.rows()) throw BadDimension("operator does not match problem rows");
  if (op.rows() < problem.cols()) throw BadDimension("sketch has fewer rows than columns");
  const SketchedSystem sys = apply(op, problem);
  QRSolution qr = qr_solve(sys.sa, sys.sb);
  return {std::move(qr.x), qr.cost, sys.apply_cost, qr.factors.r(), std::move(qr.qt_b)};
}

SketchOperator sample_operator(std::shared_ptr<const SketchContext> context, Index s,
                               std::uint64_t seed, StreamId id) {
  return SketchOperator(SketchDraws::draw(std::move(context), s, derive_seed(seed, id)), 0, s);
}

NestedSketch sample_nested(std::shared_ptr<const SketchContext> context, int level,
                           Index base_rows, std::uint64_t seed, StreamId id) {
  return make_nested(std::move(context), level, base_rows, derive_seed(seed, id));
}

SASResult sample_sas(const LSProblem& problem, std::shared_ptr<const SketchContext> context,
                     Index s, std::uint64_t seed, Index index, int* attempts) {
  const auto idx = static_cast<std::uint64_t>(index);
  try {
    if (attempts) *attempts = 1;
    return sas_solve(problem, sample_operator(context, s, seed, {purpose::sample, 0, idx}));
  } catch (const RankDeficient&) {
    if (attempts) *attempts = 2;
    return sas_solve(problem, sample_operator(context, s, seed, {purpose::resample, 0, idx}));
  }
}

MCResult mc_average(const LSProblem& problem, std::shared_ptr<const SketchContext> context,
                    Index s, Index N, std::uint64_t seed, int workers) {
  if (N < 1) throw BadDimension("mc_average needs N >= 1");
  std::vector<SASResult> results(static_cast<std::size_t>(N));
  parallel_for(N, workers, [&](Index i) {
    results[static_cast<std::size_t>(i)] = sample_sas(problem, context, s, seed, i);
  });
  MCResult out;
  out.x_bar = Vector::Zero(problem.cols());
  out.samples.reserve(results.size());
  for (auto& r : results) {
    out.x_bar += r.x;
    out.cost += r.cost;
    out.apply_cost += r.apply_cost;
    out.samples.push_back(std::move(r.x));
  }
  out.x_bar /= static_cast<double>(N);
  out.variance = N > 1 ? total_variance(out.samples, problem)
                       : std::numeric_limits<double>::quiet_NaN();
  return out;
}

MCResult mc_average(const LSProblem& problem, const SketchFamily& family, Index s, Index N,
                    std::uint64_t seed, int workers) {
  return mc_average(problem, SketchContext::create(family, problem, seed), s, N, seed, workers);
}

LevelDelta delta_from_halves(const LSProblem& problem, const SketchOperator& sa,
                             const SketchOperator& sb, DeltaMode mode, int level) {
  if (level < 1) throw BadDimension("split levels start at 1");
  LevelDelta d;
  d.level = level;
  d.mode = mode;
  d.sketch_rows = sa.rows() + sb.rows();
  const SASResult a = sas_solve(problem, sa);
  if (mode == DeltaMode::antithetic) {
    const SASResult b = sas_solve(problem, sb);
    MergeSolution fine = merge_solve(a.r, b.r, a.qt_b, b.qt_b);
    d.delta_x = fine.x - 0.5 * (a.x + b.x);
    d.fine_x = std::move(fine.x);
    d.cost = a.cost + b.cost + fine.cost;
    d.apply_cost = a.apply_cost + b.apply_cost;
    d.coarse_parts = {a.x, b.x};
  } else if (mode == DeltaMode::plain) {
    const SketchedSystem ha = apply(sa, problem);
    const SketchedSystem hb = apply(sb, problem);
    const double half = std::sqrt(0.5);
    Matrix sa_fine(ha.sa.rows() + hb.sa.rows(), problem.cols());
    sa_fine << half * ha.sa, half * hb.sa;
    Vector sb_fine(ha.sb.size() + hb.sb.size());
    sb_fine << half * ha.sb, half * hb.sb;
    QRSolution fine = qr_solve(sa_fine, sb_fine);
    d.delta_x = fine.x - a.x;
    d.fine_x = std::move(fine.x);
    d.cost = fine.cost + a.cost;
    d.apply_cost = ha.apply_cost + hb.apply_cost;
    d.coarse_parts = {a.x};
  } else {
    throw InvalidSpec("recycled samples come from recycled_sampler");
  }
  return d;
}

LevelDelta sample_delta(const LSProblem& problem, const NestedSketch& nested, int level,
                        DeltaMode mode) {
  if (level == 0) {
    SASResult r = sas_solve(problem, nested.level(0));
    LevelDelta d;
    d.level = 0;
    d.mode = mode;
    d.sketch_rows = nested.rows_at(0);
    d.delta_x = r.x;
    d.fine_x = std::move(r.x);
    d.cost = r.cost;
    d.apply_cost = r.apply_cost;
    return d;
  }
  const auto [sa, sb] = nested.split(level);
  return delta_from_halves(problem, sa, sb, mode, level);
}

LevelDelta sample_delta(const LSProblem& problem, std::shared_ptr<const SketchContext> context,
                        int level, Index base_rows, DeltaMode mode, std::uint64_t seed,
                        Index index) {
  const auto lvl = static_cast<std::uint32_t>(level);
  const auto idx = static_cast<std::uint64_t>(index);
  StreamId id{purpose::sample, lvl, idx};
  LevelDelta d;
  try {
    d = sample_delta(problem, sample_nested(context, level, base_rows, seed, id), level, mode);
  } catch (const RankDeficient&) {
    id = {purpose::resample, lvl, idx};
    d = sample_delta(problem, sample_nested(context, level, base_rows, seed, id), level, mode);
    d.attempts = 2;
  }
  d.stream = id;
  return d;
}

std::vector<LevelDelta> sample_level(const LSProblem& problem,
                                     std::shared_ptr<const SketchContext> context, int level,
                                     Index base_rows, DeltaMode mode, std::uint64_t seed,
                                     Index first, Index count, int workers) {
  std::vector<LevelDelta> out(static_cast<std::size_t>(std::max<Index>(count, 0)));
  parallel_for(count, workers, [&](Index i) {
    out[static_cast<std::size_t>(i)] =
        sample_delta(problem, context, level, base_rows, mode, seed, first + i);
  });
  return out;
}

// ---------------------------------------------------------------- estimators

void EstimatorConfig::validate() const {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidSpec("eps must be positive");
  if (n_pilot < 2) throw InvalidSpec("n_pilot must be >= 2");
  if (L < 0) throw InvalidSpec("L must be >= 0");
  if (max_samples < n_pilot) throw InvalidSpec("max_samples must be >= n_pilot");
  if (base_rows < 0) throw InvalidSpec("base sketch size must be >= 0");
  if (mode == DeltaMode::recycled && !recycle) throw InvalidSpec("recycled mode needs recycle set");
  if (bias_eta && !(*bias_eta > 0.0 && *bias_eta < 1.0)) throw InvalidSpec("eta must lie in (0, 1)");
}

std::vector<Index> optimal_allocation(const std::vector<double>& V, const std::vector<double>& C,
                                      double eps) {
  if (V.size() != C.size() || V.empty()) throw BadDimension("V and C must have equal nonzero length");
  if (!std::isfinite(eps) || !(eps > 0.0)) throw NonPositiveValue("eps must be positive");
  double sum = 0.0;
  for (std::size_t l = 0; l < V.size(); ++l) {
    if (!std::isfinite(V[l]) || !std::isfinite(C[l])) {
      throw AllocationInfeasible("nonfinite variance or cost at level " + std::to_string(l));
    }
    if (V[l] < 0.0 || !(C[l] > 0.0)) {
      throw NonPositiveValue("allocation needs V >= 0 and C > 0 at level " + std::to_string(l));
    }
    sum += std::sqrt(V[l] * C[l]);
  }
  std::vector<Index> N(V.size());
  for (std::size_t l = 0; l < V.size(); ++l) {
    const double raw = std::sqrt(V[l] / C[l]) * sum / (eps * eps);
    if (!std::isfinite(raw) || raw > 9.0e18) throw AllocationInfeasible("sample count overflows");
    N[l] = static_cast<Index>(std::ceil(raw));
  }
  return N;
}

double bias_bound(const LSProblem& problem, const Vector& x_L, Index s_L, double eta,
                  double lev_max) {
  const double n = static_cast<double>(problem.cols());
  const double res = (1.0 + eta) * residual_norm(problem, x_L);
  return std::sqrt(4.0 * eta * (n / static_cast<double>(s_L)) * res * res * lev_max);
}

double bias_bound_exact(const LSProblem& problem, Index s_L, double eta, double lev_max) {
  if (!problem.residual_star()) throw MissingSVD("exact bias bound needs the optimal residual");
  const double n = static_cast<double>(problem.cols());
  const double res = *problem.residual_star();
  return std::sqrt(4.0 * eta * (n / static_cast<double>(s_L)) * res * res * lev_max);
}

double max_leverage(const LSProblem& problem, std::uint64_t seed) {
  if (problem.svd()) return problem.svd()->u.rowwise().squaredNorm().maxCoeff();
  const Index n = problem.cols();
  const Index logn = static_cast<Index>(std::ceil(std::log2(static_cast<double>(std::max<Index>(n, 2)))));
  const Index size = std::min(problem.rows(), std::max(2 * n, 4 * n * logn));
  return approx_leverage_scores(problem.a(), size, seed).maxCoeff();
}

namespace {

struct LevelPool {
  std::vector<std::vector<LevelDelta>> samples;
};

void top_up(LevelPool& pool, int level, Index target, const LSProblem& problem,
            const std::shared_ptr<const SketchContext>& ctx, Index base, const EstimatorConfig& cfg) {
  auto& have = pool.samples[static_cast<std::size_t>(level)];
  const Index current = static_cast<Index>(have.size());
  if (target <= current) return;
  auto extra =
      sample_level(problem, ctx, level, base, cfg.mode, cfg.seed, current, target - current, cfg.workers);
  have.insert(have.end(), std::make_move_iterator(extra.begin()), std::make_move_iterator(extra.end()));
}

std::vector<LevelStats> all_stats(const LevelPool& pool, const LSProblem& problem) {
  std::vector<LevelStats> out;
  for (const auto& s : pool.samples) out.push_back(level_stats(s, problem));
  return out;
}

void allocate_and_top_up(LevelPool& pool, const LSProblem& problem,
                         const std::shared_ptr<const SketchContext>& ctx, Index base,
                         const EstimatorConfig& cfg, double eps) {
  const auto stats = all_stats(pool, problem);
  std::vector<double> V, C;
  for (const auto& s : stats) {
    V.push_back(s.V_ell);
    C.push_back(s.C_ell);
  }
  const auto N = optimal_allocation(V, C, eps);
  for (std::size_t l = 0; l < N.size(); ++l) {
    if (N[l] > cfg.max_samples) {
      throw AllocationInfeasible("level " + std::to_string(l) + " needs " + std::to_string(N[l]) +
                                 " samples, above the limit of " + std::to_string(cfg.max_samples));
    }
  }
  for (std::size_t l = 0; l < N.size(); ++l) {
    top_up(pool, static_cast<int>(l), std::max(N[l], cfg.n_pilot), problem, ctx, base, cfg);
  }
}

MLSASResult summarize(const LevelPool& pool, const LSProblem& problem, const EstimatorConfig& cfg,
                      Index base) {
  MLSASResult out;
  out.per_level = all_stats(pool, problem);
  out.x_hat = Vector::Zero(problem.cols());
  for (std::size_t l = 0; l < out.per_level.size(); ++l) {
    const auto& st = out.per_level[l];
    out.x_hat += st.mean_delta;
    out.variance_total += st.V_ell / static_cast<double>(st.N);
    for (const auto& d : pool.samples[l]) {
      out.total_cost += d.cost;
      out.apply_cost += d.apply_cost;
    }
  }
  if (cfg.bias_eta) {
    const auto& top = pool.samples.back();
    Vector x_L = Vector::Zero(problem.cols());
    for (const auto& d : top) x_L += d.fine_x;
    x_L /= static_cast<double>(top.size());
    const int L = static_cast<int>(pool.samples.size()) - 1;
    out.bias_bound = bias_bound(problem, x_L, base << L, *cfg.bias_eta,
                                max_leverage(problem, derive_seed(cfg.seed, {purpose::leverage_approx, 0, 1})));
  }
  return out;
}

void check_mode(const EstimatorConfig& cfg) {
  if (cfg.mode == DeltaMode::recycled) {
    throw InvalidSpec("recycled samples are built with recycled_sampler, not the estimator driver");
  }
}

}  // namespace

MLSASResult mlsas_estimate(const LSProblem& problem, const EstimatorConfig& config) {
  config.validate();
  check_mode(config);
  const Index base = config.base_for(problem.cols());
  const auto ctx = SketchContext::create(config.family, problem, config.seed);
  if (config.family.samples_without_replacement() &&
      (base << config.L) > ctx->selectable_rows()) {
    throw LevelTooLarge("s_L exceeds the rows available for selection");
  }
  LevelPool pool;
  pool.samples.resize(static_cast<std::size_t>(config.L) + 1);
  for (int l = 0; l <= config.L; ++l) top_up(pool, l, config.n_pilot, problem, ctx, base, config);
  allocate_and_top_up(pool, problem, ctx, base, config, config.eps);
  MLSASResult out = summarize(pool, problem, config, base);
  out.iterations = 1;
  return out;
}

MLSASResult adaptive_mlsas(const LSProblem& problem, const EstimatorConfig& config) {
  config.validate();
  check_mode(config);
  const Index base = config.base_for(problem.cols());
  const auto ctx = SketchContext::create(config.family, problem, config.seed);
  const Index m = problem.rows();
  if ((base << config.L) > m) throw LevelTooLarge("initial s_L exceeds m");

  LevelPool pool;
  int L = std::max(config.L, 1);
  while ((base << L) > m) --L;
  if (L < 1) throw LevelTooLarge("need at least two levels below m");
  pool.samples.resize(static_cast<std::size_t>(L) + 1);
  for (int l = 0; l <= L; ++l) top_up(pool, l, config.n_pilot, problem, ctx, base, config);

  const double var_eps = config.eps / std::sqrt(2.0);
  const double bias_sq_target = 0.5 * config.eps * config.eps;
  bool flagged = false;
  int iterations = 0;
  for (;;) {
    ++iterations;
    allocate_and_top_up(pool, problem, ctx, base, config, var_eps);
    const auto stats = all_stats(pool, problem);

    std::vector<double> levels, means;
    for (int l = std::max(1, L - 2); l <= L; ++l) {
      const auto& st = stats[static_cast<std::size_t>(l)];
      const double mean_norm = (problem.a() * st.mean_delta).norm();
      if (mean_norm > 0.0) {
        levels.push_back(l);
        means.push_back(mean_norm);
      }
    }
    double alpha = 1.0;
    if (means.size() >= 3) alpha = std::max(0.5, -fit_slope(levels, means).slope);
    const double top = (problem.a() * stats.back().mean_delta).norm();
    const double bias_est = top / (std::pow(2.0, alpha) - 1.0);
    if (bias_est * bias_est <= bias_sq_target) break;
    if ((base << (L + 1)) > m) {
      flagged = true;
      break;
    }
    ++L;
    pool.samples.emplace_back();
    top_up(pool, L, config.n_pilot, problem, ctx, base, config);
  }
  MLSASResult out = summarize(pool, problem, config, base);
  out.max_level_reached = flagged;
  out.iterations = iterations;
  return out;
}

// ---------------------------------------------------------------- recycling

namespace {

BaseUnit merge_units(const BaseUnit& a, const BaseUnit& b) {
  MergeSolution m = merge_solve(a.r, b.r, a.qt_b, b.qt_b);
  return {std::move(m.x), std::move(m.r), std::move(m.qt_b)};
}

}  // namespace

RecycledSamples recycled_sampler(const LSProblem& problem,
                                 std::shared_ptr<const SketchContext> context,
                                 const std::vector<Index>& counts, Index base_rows,
                                 std::uint64_t seed, int workers) {
  if (counts.size() < 2) throw BadDimension("recycling needs counts for levels 0 and 1");
  const int L = static_cast<int>(counts.size()) - 1;
  const Index n = problem.cols();
  for (Index c : counts) {
    if (c < 0) throw BadDimension("sample counts must be nonnegative");
  }

  // The parity inequality and pool capacity are checked before any work.
  Index cursor_check[2] = {0, 0};
  for (int l = 2; l <= L; ++l) {
    const int p = l % 2;
    const Index pool_size = counts[static_cast<std::size_t>(p)];
    const Index need = counts[static_cast<std::size_t>(l)];
    if (need > (pool_size >> l)) {
      throw InsufficientBaseSamples("N_" + std::to_string(l) + " = " + std::to_string(need) +
                                    " exceeds 2^-" + std::to_string(l) + " N_" + std::to_string(p));
    }
    cursor_check[p] += need * (Index{1} << (l - p));
    if (cursor_check[p] > pool_size) {
      throw InsufficientBaseSamples("pool " + std::to_string(p) + " exhausted at level " +
                                    std::to_string(l));
    }
  }

  RecycledSamples out;
  out.base_rows = base_rows;
  out.deltas.resize(counts.size());
  out.sources.resize(counts.size());

  std::vector<BaseUnit> pools[2];
  const Index n0 = counts[0];
  const Index n1 = counts[1];
  pools[0].resize(static_cast<std::size_t>(n0));
  pools[1].resize(static_cast<std::size_t>(n1));
  out.deltas[0].resize(static_cast<std::size_t>(n0));
  out.deltas[1].resize(static_cast<std::size_t>(n1));

  parallel_for(n0, workers, [&](Index i) {
    int attempts = 1;
    SASResult r = sample_sas(problem, context, base_rows, seed, i, &attempts);
    LevelDelta& d = out.deltas[0][static_cast<std::size_t>(i)];
    d.level = 0;
    d.mode = DeltaMode::recycled;
    d.sketch_rows = base_rows;
    d.delta_x = r.x;
    d.fine_x = r.x;
    d.cost = r.cost;
    d.apply_cost = r.apply_cost;
    d.stream = {attempts == 1 ? purpose::sample : purpose::resample, 0, static_cast<std::uint64_t>(i)};
    d.attempts = attempts;
    pools[0][static_cast<std::size_t>(i)] = {std::move(r.x), std::move(r.r), std::move(r.qt_b)};
  });

  parallel_for(n1, workers, [&](Index i) {
    const auto idx = static_cast<std::uint64_t>(i);
    auto build = [&](StreamId id) {
      const NestedSketch nested = sample_nested(context, 1, base_rows, seed, id);
      const auto [sa, sb] = nested.split(1);
      const SASResult a = sas_solve(problem, sa);
      const SASResult b = sas_solve(problem, sb);
      MergeSolution fine = merge_solve(a.r, b.r, a.qt_b, b.qt_b);
      LevelDelta d;
      d.level = 1;
      d.mode = DeltaMode::recycled;
      d.sketch_rows = 2 * base_rows;
      d.delta_x = fine.x - 0.5 * (a.x + b.x);
      d.fine_x = fine.x;
      d.coarse_parts = {a.x, b.x};
      d.cost = a.cost + b.cost + fine.cost;
      d.apply_cost = a.apply_cost + b.apply_cost;
      d.stream = id;
      pools[1][static_cast<std::size_t>(i)] = {std::move(fine.x), std::move(fine.r), std::move(fine.qt_b)};
      return d;
    };
    LevelDelta d;
    try {
      d = build({purpose::sample, 1, idx});
    } catch (const RankDeficient&) {
      d = build({purpose::resample, 1, idx});
      d.attempts = 2;
    }
    out.deltas[1][static_cast<std::size_t>(i)] = std::move(d);
  });

  for (int p = 0; p < 2; ++p) {
    out.usage[p].assign(pools[p].size(), {});
    for (std::size_t u = 0; u < pools[p].size(); ++u) {
      out.usage[p][u].push_back(p);
      out.sources[static_cast<std::size_t>(p)].push_back({static_cast<Index>(u)});
    }
  }

  Index cursor[2] = {0, 0};
  for (int l = 2; l <= L; ++l) {
    const int p = l % 2;
    const Index k = Index{1} << (l - p);
    const Index count = counts[static_cast<std::size_t>(l)];
    const Index start = cursor[p];
    cursor[p] += count * k;
    auto& deltas = out.deltas[static_cast<std::size_t>(l)];
    auto& sources = out.sources[static_cast<std::size_t>(l)];
    deltas.resize(static_cast<std::size_t>(count));
    sources.resize(static_cast<std::size_t>(count));
    parallel_for(count, workers, [&](Index j) {
      const Index first = start + j * k;
      std::vector<BaseUnit> level_units(pools[p].begin() + first, pools[p].begin() + first + k);
      Index merges = 0;
      while (level_units.size() > 2) {
        std::vector<BaseUnit> next;
        for (std::size_t q = 0; q + 1 < level_units.size(); q += 2) {
          next.push_back(merge_units(level_units[q], level_units[q + 1]));
          ++merges;
        }
        level_units = std::move(next);
      }
      BaseUnit fine = merge_units(level_units[0], level_units[1]);
      ++merges;
      LevelDelta d;
      d.level = l;
      d.mode = DeltaMode::recycled;
      d.sketch_rows = base_rows << l;
      d.delta_x = fine.x - 0.5 * (level_units[0].x + level_units[1].x);
      d.fine_x = std::move(fine.x);
      d.coarse_parts = {level_units[0].x, level_units[1].x};
      d.cost = merges * merge_cost(n);
      d.stream = {purpose::base_sample, static_cast<std::uint32_t>(l), static_cast<std::uint64_t>(j)};
      deltas[static_cast<std::size_t>(j)] = std::move(d);
      std::vector<Index>& src = sources[static_cast<std::size_t>(j)];
      for (Index u = first; u < first + k; ++u) src.push_back(u);
    });
    for (Index u = start; u < cursor[p]; ++u) out.usage[p][static_cast<std::size_t>(u)].push_back(l);
  }
  return out;
}

bool audit_usage(const RecycledSamples& samples) {
  for (const auto& pool : samples.usage) {
    for (const auto& levels : pool) {
      if (levels.size() > 2) return false;
      for (std::size_t a = 0; a < levels.size(); ++a) {
        for (std::size_t b = a + 1; b < levels.size(); ++b) {
          if (std::abs(levels[a] - levels[b]) <= 1) return false;
        }
      }
    }
  }
  return true;
}

std::pair<std::vector<Vector>, std::vector<Vector>> recycled_pairs(const RecycledSamples& samples,
                                                                   int lo) {
  if (lo != 0 && lo != 1) throw BadDimension("pairs are defined for base levels 0 and 1");
  const int hi = lo + 2;
  if (static_cast<std::size_t>(hi) >= samples.deltas.size()) throw BadDimension("level lo + 2 missing");
  std::pair<std::vector<Vector>, std::vector<Vector>> out;
  const auto& his = samples.deltas[static_cast<std::size_t>(hi)];
  const auto& src = samples.sources[static_cast<std::size_t>(hi)];
  for (std::size_t j = 0; j < his.size(); ++j) {
    for (Index u : src[j]) {
      out.first.push_back(samples.deltas[static_cast<std::size_t>(lo)][static_cast<std::size_t>(u)].delta_x);
      out.second.push_back(his[j].delta_x);
    }
  }
  return out;
}

}  // namespace mlsas
