#include "mlsas/experiments.hpp"

#include "mlsas/diagnostics.hpp"
#include "mlsas/errors.hpp"
#include "mlsas/estimators.hpp"
#include "mlsas/sketch.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mlsas {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

  CsvWriter& row() {
    rows_.emplace_back();
    return *this;
  }
  CsvWriter& operator<<(const std::string& v) {
    rows_.back().push_back(v);
    return *this;
  }
  CsvWriter& operator<<(const char* v) { return *this << std::string(v); }
  CsvWriter& operator<<(double v) { return *this << format_double(v); }
  CsvWriter& operator<<(Index v) { return *this << std::to_string(v); }
  CsvWriter& operator<<(int v) { return *this << std::to_string(v); }

  void save(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidSpec("cannot write " + path.string());
    write_line(out, header_);
    for (const auto& r : rows_) write_line(out, r);
  }

 private:
  static void write_line(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << csv_field(fields[i]);
    }
    out << "\r\n";
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct Context {
  const RunOptions& opt;
  LSProblem problem;
  SketchFamily family;
  Index base;
  Index samples;
  fs::path dir;
  RunOutput out;
  std::ostringstream summary;
  nlohmann::json extra = nlohmann::json::object();

  void save(const CsvWriter& csv, const std::string& name) {
    csv.save(dir / name);
    out.files.push_back(name);
  }
  void count(const std::vector<LevelDelta>& deltas) {
    for (const auto& d : deltas) out.flops += d.cost;
  }
};

Index recipe_samples(const RunOptions& opt) {
  if (opt.samples > 0) return opt.samples;
  if (opt.recipe == "fig2_factors" || opt.recipe == "table2_slopes") return 100;
  if (opt.recipe == "correlations") return opt.quick ? 2000 : 16000;
  if (opt.recipe == "adaptive_demo") return 100;
  return opt.quick ? 200 : 1000;
}

std::string slope_line(const std::string& label, const SlopeFit& fit) {
  std::ostringstream s;
  s << label << ": slope " << format_double(fit.slope) << ", intercept " << format_double(fit.intercept)
    << ", r^2 " << format_double(fit.r_squared);
  return s.str();
}

std::vector<double> level_axis(int first, int last) {
  std::vector<double> xs;
  for (int l = first; l <= last; ++l) xs.push_back(l);
  return xs;
}

LevelDelta as_plain(const LevelDelta& d) {
  LevelDelta q = d;
  q.mode = DeltaMode::plain;
  if (d.level > 0) {
    q.delta_x = d.fine_x - d.coarse_parts[0];
    q.coarse_parts = {d.coarse_parts[0]};
  }
  return q;
}

LevelDelta as_mc(const LevelDelta& d) {
  LevelDelta q = d;
  q.delta_x = d.fine_x;
  q.coarse_parts.clear();
  return q;
}

void run_fig1(Context& c) {
  const int L = c.opt.levels;
  const auto ctx = SketchContext::create(c.family, c.problem, c.opt.seed);
  CsvWriter var({"level", "sketch_size", "estimator", "V", "N", "stderr"});
  CsvWriter parts({"level", "sketch_size", "estimator", "alpha", "beta_of_delta", "beta_of_x", "V_plugin", "C_ell"});
  std::vector<double> va, vp, vm;
  for (int l = 0; l <= L; ++l) {
    const auto anti = sample_level(c.problem, ctx, l, c.base, DeltaMode::antithetic, c.opt.seed, 0,
                                   c.samples, c.opt.workers);
    c.count(anti);
    std::vector<LevelDelta> plain, mc;
    for (const auto& d : anti) {
      plain.push_back(as_plain(d));
      mc.push_back(as_mc(d));
    }
    const LevelStats sets[3] = {level_stats(anti, c.problem), level_stats(plain, c.problem),
                                level_stats(mc, c.problem)};
    const char* names[3] = {"antithetic", "plain", "mc"};
    for (int k = 0; k < 3; ++k) {
      const LevelStats& st = sets[k];
      var.row() << l << st.sketch_rows << names[k] << st.V_ell << st.N << st.v_stderr;
      parts.row() << l << st.sketch_rows << names[k] << st.alpha << st.beta_of_delta << st.beta_of_x
                  << st.V_plugin << st.C_ell;
    }
    va.push_back(sets[0].V_ell);
    vp.push_back(sets[1].V_ell);
    vm.push_back(sets[2].V_ell);
  }
  c.save(var, "fig1_variances.csv");
  c.save(parts, "level_stats.csv");
  CsvWriter fits({"estimator", "first_level", "last_level", "slope", "intercept", "r_squared"});
  const std::pair<const char*, const std::vector<double>*> series[3] = {
      {"antithetic", &va}, {"plain", &vp}, {"mc", &vm}};
  for (int first : {1, 0}) {
    if (L - first < 2) continue;
    const auto xs = level_axis(first, L);
    for (const auto& [name, v] : series) {
      const std::vector<double> ys(v->begin() + first, v->end());
      const SlopeFit fit = fit_slope(xs, ys);
      fits.row() << name << first << L << fit.slope << fit.intercept << fit.r_squared;
      c.summary << slope_line("log2 V slope, levels " + std::to_string(first) + "-" + std::to_string(L) +
                                  " (" + name + ")",
                              fit)
                << "\n";
    }
  }
  c.save(fits, "fig1_slopes.csv");
}

struct FactorTable {
  std::vector<double> levels, h_inv, h_diff, h_b, x_diff;
  double worst_reconstruction = 0.0;
};

FactorTable factor_table(Context& c, CsvWriter& csv) {
  const int L = c.opt.levels;
  const auto ctx = SketchContext::create(c.family, c.problem, c.opt.seed);
  FactorTable t;
  for (int l = 1; l <= L; ++l) {
    const auto samples = sample_level(c.problem, ctx, l, c.base, DeltaMode::antithetic, c.opt.seed,
                                      0, c.samples, c.opt.workers);
    c.count(samples);
    std::vector<FactorNorms> records(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const NestedSketch nested = sample_nested(ctx, l, c.base, c.opt.seed, samples[i].stream);
      records[i] = factor_decomposition(samples[i], c.problem, nested, l);
    }
    const FactorNorms m = mean_factors(records);
    csv.row() << l << (c.base << l) << m.h_inv_sq << m.h_diff_sq << m.h_b_sq << m.x_ab_diff_sq
              << m.reconstruction_error << static_cast<Index>(records.size());
    t.levels.push_back(l);
    t.h_inv.push_back(m.h_inv_sq);
    t.h_diff.push_back(m.h_diff_sq);
    t.h_b.push_back(m.h_b_sq);
    t.x_diff.push_back(m.x_ab_diff_sq);
    t.worst_reconstruction = std::max(t.worst_reconstruction, m.reconstruction_error);
  }
  return t;
}

void run_fig2(Context& c) {
  if (!c.problem.svd()) throw MissingSVD("factor recipes need the SVD of A");
  CsvWriter csv({"level", "sketch_size", "h_inv_sq", "h_diff_sq", "h_b_sq", "x_ab_diff_sq",
                 "max_reconstruction_error", "N"});
  const FactorTable t = factor_table(c, csv);
  c.save(csv, "fig2_factors.csv");
  c.summary << "max relative reconstruction error: " << format_double(t.worst_reconstruction) << "\n";

  if (c.opt.recipe != "table2_slopes" || t.levels.size() < 3) return;
  CsvWriter fits({"quantity", "slope", "intercept", "r_squared", "expected_slope"});
  const std::tuple<const char*, const std::vector<double>*, double> rows[4] = {
      {"h_diff_sq", &t.h_diff, -1.0},
      {"x_ab_diff_sq", &t.x_diff, -1.0},
      {"h_inv_sq", &t.h_inv, 0.0},
      {"h_b_sq", &t.h_b, 0.0}};
  for (const auto& [name, v, expected] : rows) {
    const SlopeFit fit = fit_slope(t.levels, *v);
    fits.row() << name << fit.slope << fit.intercept << fit.r_squared << expected;
    c.summary << slope_line(std::string("log2 slope of ") + name, fit) << "\n";
  }
  c.save(fits, "table2_slopes.csv");
}

void run_correlations(Context& c) {
  const auto ctx = SketchContext::create(c.family, c.problem, c.opt.seed);
  const Index n0 = c.samples;
  const std::vector<Index> counts = {n0, n0, n0 >> 2, n0 >> 3};
  const RecycledSamples rs = recycled_sampler(c.problem, ctx, counts, c.base, c.opt.seed, c.opt.workers);
  for (const auto& level : rs.deltas) c.count(level);
  CsvWriter csv({"level_lo", "level_hi", "rho_x", "rho_Ax", "pairs", "scalarization"});
  for (int lo = 0; lo <= 1; ++lo) {
    const auto [x, y] = recycled_pairs(rs, lo);
    const Correlation r = cross_level_correlation(x, y, c.problem);
    csv.row() << lo << lo + 2 << r.rho_x << r.rho_ax << r.pairs << "trace";
    c.summary << "rho(" << lo << "," << lo + 2 << "): dx " << format_double(r.rho_x) << ", A dx "
              << format_double(r.rho_ax) << " over " << r.pairs << " pairs\n";
  }
  c.save(csv, "correlations.csv");
  CsvWriter counts_csv({"level", "N", "sketch_size"});
  for (std::size_t l = 0; l < rs.deltas.size(); ++l) {
    counts_csv.row() << static_cast<int>(l) << static_cast<Index>(rs.deltas[l].size()) << (c.base << l);
  }
  c.save(counts_csv, "recycled_counts.csv");
  c.summary << "usage audit: " << (audit_usage(rs) ? "pass" : "FAIL") << "\n";
}

void run_cost_compare(Context& c) {
  const int L = c.opt.levels;
  const Index n = c.problem.cols();
  const auto ctx = SketchContext::create(c.family, c.problem, c.opt.seed);
  std::vector<double> V, measured_C;
  double mc_V = 0.0;
  for (int l = 0; l <= L; ++l) {
    const auto samples = sample_level(c.problem, ctx, l, c.base, DeltaMode::antithetic, c.opt.seed, 0,
                                      c.samples, c.opt.workers);
    c.count(samples);
    const LevelStats st = level_stats(samples, c.problem);
    V.push_back(st.V_ell);
    measured_C.push_back(st.C_ell);
    if (l == L) {
      std::vector<LevelDelta> mc;
      for (const auto& d : samples) mc.push_back(as_mc(d));
      mc_V = level_stats(mc, c.problem).V_ell;
    }
  }
  const double eps = c.opt.eps > 0.0 ? c.opt.eps : 1e-2;
  const double mc_C = mc_sample_cost(L, n, c.base).value();
  CsvWriter levels({"variant", "level", "sketch_size", "V", "C", "sqrt_VC"});
  CsvWriter totals({"variant", "eps", "mlsas_total", "mc_V_L", "mc_C_L", "mc_total", "verdict"});
  for (CostVariant v : {CostVariant::classic, CostVariant::merged, CostVariant::recycled, CostVariant::measured}) {
    std::vector<double> C = measured_C;
    if (v != CostVariant::measured) {
      C.clear();
      for (Flops f : level_costs(v, L, n, c.base)) C.push_back(f.value());
    }
    const CostReport r = cost_compare(V, C, mc_V, mc_C, eps, v);
    for (int l = 0; l <= L; ++l) {
      const auto k = static_cast<std::size_t>(l);
      levels.row() << to_string(v) << l << (c.base << l) << r.V[k] << r.C[k] << r.sqrt_vc[k];
    }
    totals.row() << to_string(v) << eps << r.mlsas_total << r.mc_V_L << r.mc_C_L << r.mc_total << r.verdict;
    c.summary << to_string(v) << ": " << r.verdict << " (" << format_double(r.mlsas_total) << " vs "
              << format_double(r.mc_total) << ")\n";
  }
  c.save(levels, "cost_levels.csv");
  c.save(totals, "cost_compare.csv");
  if (L >= 2) {
    const double nd = static_cast<double>(n);
    const double chain = analytic_mlsas_cost(1.0, nd, L, 22.0 / 3.0, 18.0, 10.0 / 3.0);
    const double approx = analytic_mlsas_cost(1.0, nd, L, 7.0, 18.0, 3.0);
    c.summary << "analytic chain (V0 = 1): exact costs " << format_double(chain / (nd * nd * nd))
              << " n^3, rounded costs " << format_double(approx / (nd * nd * nd)) << " n^3, MC 8 n^3\n";
  }
}

void run_mc_trend(Context& c) {
  const Index n = c.problem.cols();
  std::vector<Index> sizes;
  for (Index k : {4, 8, 16, 32}) {
    if (k * n <= c.problem.rows() || !c.family.samples_without_replacement()) sizes.push_back(k * n);
  }
  const MCTrend t = mc_variance_trend(c.problem, c.family, sizes, c.samples, c.opt.seed, c.opt.workers);
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    c.out.flops += static_cast<std::int64_t>(c.samples) * householder_cost(sizes[i], n);
  }
  CsvWriter csv({"sketch_size", "variance", "bound", "N"});
  for (std::size_t i = 0; i < t.sizes.size(); ++i) {
    csv.row() << t.sizes[i] << t.variance[i] << t.bound[i] << t.samples[i];
  }
  c.save(csv, "mc_trend.csv");
  if (t.sizes.size() >= 3) c.summary << slope_line("log2 Var(A x) vs log2 s", t.fit) << "\n";
  if (c.family.kind == SketchKind::gaussian) {
    c.summary << "gaussian bound (1.2 x n/(s-n-1) ||r*||^2): " << (t.within_bound ? "holds" : "VIOLATED") << "\n";
  }
}

void run_adaptive(Context& c) {
  EstimatorConfig cfg;
  cfg.family = c.family;
  cfg.mode = c.opt.mode == DeltaMode::recycled ? DeltaMode::antithetic : c.opt.mode;
  cfg.L = std::min(c.opt.levels, 2);
  cfg.eps = c.opt.eps > 0.0 ? c.opt.eps : 1e-2;
  cfg.n_pilot = c.samples;
  cfg.seed = c.opt.seed;
  cfg.base_rows = c.base;
  cfg.workers = c.opt.workers;
  cfg.bias_eta = 0.5;
  const MLSASResult r = adaptive_mlsas(c.problem, cfg);
  c.out.flops += r.total_cost;
  CsvWriter csv({"level", "sketch_size", "N", "V", "C", "mean_norm"});
  for (const auto& st : r.per_level) {
    csv.row() << st.level << st.sketch_rows << st.N << st.V_ell << st.C_ell
              << (c.problem.a() * st.mean_delta).norm();
  }
  c.save(csv, "adaptive.csv");
  const double err = (c.problem.a() * (r.x_hat - *c.problem.x_star())).norm();
  c.summary << "levels used: " << r.per_level.size() << ", iterations " << r.iterations
            << (r.max_level_reached ? ", stopped at the largest level below m" : "") << "\n"
            << "sum V/N: " << format_double(r.variance_total) << " (target eps^2/2 = "
            << format_double(0.5 * cfg.eps * cfg.eps) << ")\n"
            << "||A(x_hat - x*)||: " << format_double(err) << "\n"
            << "total model cost: " << format_double(r.total_cost.value()) << "\n";
  if (r.bias_bound) c.summary << "bias bound (eta = 0.5): " << format_double(*r.bias_bound) << "\n";
}

nlohmann::json decisions(const RunOptions& opt, const SketchFamily& family, Index base) {
  return {
      {"family", family.name()},
      {"uniform_with_replacement", family.kind == SketchKind::uniform ? family.with_replacement : true},
      {"srht_padding", "zero pad to the next power of two, orthonormal transform"},
      {"srht_srtt_selection", "uniform without replacement"},
      {"srtt_transform", "orthonormal DCT-II"},
      {"leverage_weighting", family.weighted ? "diag(1/sqrt(l_i)) on sketched rows" : "none"},
      {"base_sketch_rows", base},
      {"level_sizes", "s_l = base * 2^l"},
      {"variance_convention", "squared norm, unbiased N/(N-1)"},
      {"correlation_scalarization", "trace(Cov(X,Y))/sqrt(trace Cov(X,X) trace Cov(Y,Y))"},
      {"weak_test_scalar", "||A mean(dx_L)||"},
      {"plain_coarse", "S_a half of the fine split"},
      {"fig1_shared_sketches", opt.recipe == "fig1_variances"},
      {"rank_tol", 1e-12},
      {"cost_model", "flop model; sketch application logged separately"},
      {"rng", "Philox4x32-10, per-(purpose, level, sample) streams"},
  };
}

}  // namespace

void RunOptions::validate() const {
  if (std::find(recipe_names().begin(), recipe_names().end(), recipe) == recipe_names().end()) {
    throw InvalidSpec("unknown recipe '" + recipe + "'");
  }
  SketchFamily::parse(family);
  problem.validate();
  if (levels < 0 || levels > 30) throw InvalidSpec("levels must lie in [0, 30]");
  if (samples < 0) throw InvalidSpec("samples must be >= 0");
  if (eps < 0.0 || !std::isfinite(eps)) throw InvalidSpec("eps must be >= 0");
  if (workers < 1) throw InvalidSpec("workers must be >= 1");
  if (sketch_base < 0) throw InvalidSpec("sketch-base must be >= 0");
  if (out.empty()) throw InvalidSpec("output directory must be set");
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int number = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(number) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

void apply_config(const std::map<std::string, std::string>& config, RunOptions& o) {
  for (const auto& [key, value] : config) {
    try {
      if (key == "recipe") o.recipe = value;
      else if (key == "seed") o.seed = std::stoull(value);
      else if (key == "m") o.problem.m = std::stoll(value);
      else if (key == "n") o.problem.n = std::stoll(value);
      else if (key == "cond") o.problem.cond = std::stod(value);
      else if (key == "noise") o.problem.noise = std::stod(value);
      else if (key == "kind") o.problem.kind = parse_problem_kind(value);
      else if (key == "family") o.family = value;
      else if (key == "mode") o.mode = parse_delta_mode(value);
      else if (key == "levels") o.levels = std::stoi(value);
      else if (key == "eps") o.eps = std::stod(value);
      else if (key == "samples") o.samples = std::stoll(value);
      else if (key == "quick") o.quick = value == "1" || value == "true" || value == "yes";
      else if (key == "out") o.out = value;
      else if (key == "workers") o.workers = std::stoi(value);
      else if (key == "sketch-base" || key == "sketch_base") o.sketch_base = std::stoll(value);
      else throw InvalidSpec("unknown config key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw InvalidSpec("bad value '" + value + "' for " + key);
    } catch (const std::out_of_range&) {
      throw InvalidSpec("value out of range for " + key);
    }
  }
}

void apply_quick(RunOptions& o, const std::vector<std::string>& explicit_keys) {
  if (!o.quick) return;
  auto given = [&](const char* k) {
    return std::find(explicit_keys.begin(), explicit_keys.end(), k) != explicit_keys.end();
  };
  if (!given("m")) o.problem.m = 1600;
  if (!given("n")) o.problem.n = 25;
  if (!given("samples") && o.recipe != "fig2_factors" && o.recipe != "table2_slopes" &&
      o.recipe != "correlations" && o.recipe != "adaptive_demo") {
    o.samples = 200;
  }
}

RunOutput run_recipe(const RunOptions& options) {
  options.validate();
  const auto started = std::chrono::steady_clock::now();
  ProblemSpec spec = options.problem;
  spec.seed = options.seed;
  const SketchFamily family = SketchFamily::parse(options.family);
  Index base = options.sketch_base;
  if (base == 0) base = (options.recipe == "cost_compare" ? 4 : 2) * spec.n;

  fs::create_directories(options.out);
  Context c{options, generate(spec), family, base, recipe_samples(options), fs::path(options.out), {}, {}, {}};

  if (options.recipe == "fig1_variances") run_fig1(c);
  else if (options.recipe == "fig2_factors" || options.recipe == "table2_slopes") run_fig2(c);
  else if (options.recipe == "correlations") run_correlations(c);
  else if (options.recipe == "cost_compare") run_cost_compare(c);
  else if (options.recipe == "mc_trend") run_mc_trend(c);
  else run_adaptive(c);

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  nlohmann::json manifest = {
      {"recipe", options.recipe},
      {"version", kVersion},
      {"seed", options.seed},
      {"options",
       {{"m", spec.m}, {"n", spec.n}, {"cond", spec.cond}, {"noise", spec.noise},
        {"kind", to_string(spec.kind)}, {"family", options.family}, {"mode", to_string(options.mode)},
        {"levels", options.levels}, {"eps", options.eps}, {"samples", c.samples},
        {"quick", options.quick}, {"workers", options.workers}, {"sketch_base", base}}},
      {"decisions", decisions(options, family, base)},
      {"wall_time_seconds", wall},
      {"model_flops", c.out.flops.value()},
      {"files", c.out.files},
  };
  std::ofstream(c.dir / "manifest.json") << manifest.dump(2) << "\n";
  c.out.files.push_back("manifest.json");

  std::ostringstream head;
  head << "recipe " << options.recipe << " (m=" << spec.m << ", n=" << spec.n << ", family "
       << family.name() << ", seed " << options.seed << ")\n";
  c.out.summary = head.str() + c.summary.str();
  std::ofstream(c.dir / "summary.txt") << c.out.summary;
  c.out.files.push_back("summary.txt");
  return c.out;
}

}  // namespace mlsas
