#include "mlsas/diagnostics.hpp"
#include "mlsas/errors.hpp"
#include "mlsas/estimators.hpp"
#include "mlsas/experiments.hpp"
#include "mlsas/linalg.hpp"
#include "mlsas/problems.hpp"
#include "mlsas/sketch.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace mlsas;

namespace {

SketchFamily family_arg(const py::object& f) {
  if (py::isinstance<py::str>(f)) return SketchFamily::parse(f.cast<std::string>());
  return f.cast<SketchFamily>();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multilevel sketch-and-solve least squares";
  m.attr("__version__") = kVersion;

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<RankDeficient>(m, "RankDeficient", base.ptr());
  py::register_exception<InvalidSpec>(m, "InvalidSpec", base.ptr());
  py::register_exception<BadDimension>(m, "BadDimension", base.ptr());
  py::register_exception<MissingSVD>(m, "MissingSVD", base.ptr());
  py::register_exception<MissingContext>(m, "MissingContext", base.ptr());
  py::register_exception<LevelTooLarge>(m, "LevelTooLarge", base.ptr());
  py::register_exception<TooFewSamples>(m, "TooFewSamples", base.ptr());
  py::register_exception<NonPositiveValue>(m, "NonPositiveValue", base.ptr());
  py::register_exception<AllocationInfeasible>(m, "AllocationInfeasible", base.ptr());
  py::register_exception<InsufficientBaseSamples>(m, "InsufficientBaseSamples", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ConvergenceFailure>(m, "ConvergenceFailure", base.ptr());

  // ---------------------------------------------------------------- linalg
  m.def("qr_solve",
        [](const Matrix& sa, const Vector& sb) {
          const QRSolution s = qr_solve(sa, sb);
          return py::make_tuple(s.x, s.factors.r(), s.qt_b, s.cost.value());
        },
        py::arg("sa"), py::arg("sb"), "Returns (x, R, Q^T b, cost).");
  m.def("merge_solve",
        [](const Matrix& ra, const Matrix& rb, const Vector& qa, const Vector& qb) {
          const MergeSolution s = merge_solve(ra, rb, qa, qb);
          return py::make_tuple(s.x, s.cost.value());
        },
        py::arg("ra"), py::arg("rb"), py::arg("qa_t_b"), py::arg("qb_t_b"), "Returns (x, cost).");
  m.def("householder_cost", [](Index s, Index n) { return householder_cost(s, n).value(); });
  m.def("merge_cost", [](Index n) { return merge_cost(n).value(); });

  // ---------------------------------------------------------------- problems
  py::enum_<ProblemKind>(m, "ProblemKind")
      .value("randsvd_haar", ProblemKind::randsvd_haar)
      .value("coherent_spike", ProblemKind::coherent_spike)
      .value("file", ProblemKind::file);

  py::class_<ProblemSpec>(m, "ProblemSpec")
      .def(py::init<>())
      .def(py::init([](Index mm, Index n, double cond, double noise, std::uint64_t seed) {
             ProblemSpec s;
             s.m = mm;
             s.n = n;
             s.cond = cond;
             s.noise = noise;
             s.seed = seed;
             return s;
           }),
           py::arg("m") = 6400, py::arg("n") = 50, py::arg("cond") = 1e2, py::arg("noise") = 1e-3,
           py::arg("seed") = 0)
      .def_readwrite("m", &ProblemSpec::m)
      .def_readwrite("n", &ProblemSpec::n)
      .def_readwrite("cond", &ProblemSpec::cond)
      .def_readwrite("noise", &ProblemSpec::noise)
      .def_readwrite("seed", &ProblemSpec::seed)
      .def_readwrite("kind", &ProblemSpec::kind)
      .def_readwrite("spike_rows", &ProblemSpec::spike_rows)
      .def_readwrite("spike_scale", &ProblemSpec::spike_scale)
      .def_readwrite("path", &ProblemSpec::path)
      .def_readwrite("b_last_column", &ProblemSpec::b_last_column)
      .def("validate", &ProblemSpec::validate);

  py::class_<LSProblem>(m, "LSProblem")
      .def(py::init<Matrix, Vector>(), py::arg("a"), py::arg("b"))
      .def_property_readonly("a", &LSProblem::a)
      .def_property_readonly("b", &LSProblem::b)
      .def_property_readonly("rows", &LSProblem::rows)
      .def_property_readonly("cols", &LSProblem::cols)
      .def_property_readonly("x_star", &LSProblem::x_star)
      .def_property_readonly("residual_star", &LSProblem::residual_star)
      .def_property_readonly("u", [](const LSProblem& p) -> std::optional<Matrix> {
        if (!p.svd()) return std::nullopt;
        return p.svd()->u;
      })
      .def_property_readonly("singular_values", [](const LSProblem& p) -> std::optional<Vector> {
        if (!p.svd()) return std::nullopt;
        return p.svd()->sigma;
      })
      .def("with_references", &LSProblem::with_references);

  m.def("generate", &generate, py::arg("spec"));
  m.def("coherence", &coherence, py::arg("problem"));
  m.def("exact_solve", [](const LSProblem& p) {
    const ExactSolution e = exact_solve(p);
    return py::make_tuple(e.x_star, e.residual_star);
  });
  m.def("residual_norm", py::overload_cast<const LSProblem&, const Vector&>(&residual_norm), py::arg("problem"),
        py::arg("x"));
  m.def("load_problem", [](const std::string& path, bool b_last_column) {
    LoadOptions o;
    o.b_last_column = b_last_column;
    return load_problem(path, o);
  }, py::arg("path"), py::arg("b_last_column") = true);

  // ---------------------------------------------------------------- sketch
  py::enum_<SketchKind>(m, "SketchKind")
      .value("gaussian", SketchKind::gaussian)
      .value("uniform", SketchKind::uniform)
      .value("leverage", SketchKind::leverage)
      .value("srht", SketchKind::srht)
      .value("srtt", SketchKind::srtt);

  py::class_<SketchFamily>(m, "SketchFamily")
      .def(py::init([](const std::string& name) { return SketchFamily::parse(name); }), py::arg("name"))
      .def_readonly("kind", &SketchFamily::kind)
      .def_readonly("with_replacement", &SketchFamily::with_replacement)
      .def_readonly("weighted", &SketchFamily::weighted)
      .def_property_readonly("name", &SketchFamily::name)
      .def("__repr__", [](const SketchFamily& f) { return "SketchFamily('" + f.name() + "')"; });

  py::class_<SketchOperator>(m, "SketchOperator")
      .def_property_readonly("rows", &SketchOperator::rows)
      .def_property_readonly("source_rows", &SketchOperator::source_rows)
      .def_property_readonly("family", &SketchOperator::family)
      .def("selected_row", &SketchOperator::selected_row)
      .def("dense", &SketchOperator::dense)
      .def("apply", [](const SketchOperator& op, const Matrix& x) { return sketch_rows(op, x); }, py::arg("x"));

  m.def("make_operator",
        [](const py::object& family, Index s, const LSProblem& p, std::uint64_t seed) {
          return make_operator(family_arg(family), s, p, seed);
        },
        py::arg("family"), py::arg("s"), py::arg("problem"), py::arg("seed") = 0);
  m.def("leverage_scores",
        [](const Matrix& a, bool augmented, const std::optional<Vector>& b) {
          const LeverageScores ls =
              leverage_scores(a, augmented ? ScoreSource::augmented_ab : ScoreSource::plain_a, b);
          return py::make_tuple(ls.scores, ls.probs);
        },
        py::arg("a"), py::arg("augmented") = false, py::arg("b") = std::nullopt);
  m.def("approx_leverage_scores", &approx_leverage_scores, py::arg("a"), py::arg("sketch_size"),
        py::arg("seed") = 0);
  m.def("embedding_distortion", &embedding_distortion, py::arg("op"), py::arg("u"));

  // ---------------------------------------------------------------- estimators
  py::enum_<DeltaMode>(m, "DeltaMode")
      .value("antithetic", DeltaMode::antithetic)
      .value("plain", DeltaMode::plain)
      .value("recycled", DeltaMode::recycled);

  m.def("sas_solve",
        [](const LSProblem& p, const SketchOperator& op) {
          const SASResult r = sas_solve(p, op);
          return py::make_tuple(r.x, r.cost.value() + r.apply_cost.value());
        },
        py::arg("problem"), py::arg("op"), "Returns (x_hat, cost including the sketch application).");

  py::class_<MCResult>(m, "MCResult")
      .def_readonly("x_bar", &MCResult::x_bar)
      .def_readonly("variance", &MCResult::variance)
      .def_property_readonly("cost", [](const MCResult& r) { return r.cost.value(); })
      .def_property_readonly("apply_cost", [](const MCResult& r) { return r.apply_cost.value(); })
      .def_readonly("samples", &MCResult::samples);

  m.def("mc_average",
        [](const LSProblem& p, const py::object& family, Index s, Index N, std::uint64_t seed, int workers) {
          py::gil_scoped_release release;
          return mc_average(p, family_arg(family), s, N, seed, workers);
        },
        py::arg("problem"), py::arg("family"), py::arg("s"), py::arg("N"), py::arg("seed") = 0,
        py::arg("workers") = 1);

  py::class_<LevelDelta>(m, "LevelDelta")
      .def_readonly("level", &LevelDelta::level)
      .def_readonly("sketch_rows", &LevelDelta::sketch_rows)
      .def_readonly("delta_x", &LevelDelta::delta_x)
      .def_readonly("fine_x", &LevelDelta::fine_x)
      .def_readonly("coarse_parts", &LevelDelta::coarse_parts)
      .def_readonly("mode", &LevelDelta::mode)
      .def_readonly("attempts", &LevelDelta::attempts)
      .def_property_readonly("cost", [](const LevelDelta& d) { return d.cost.value(); });

  m.def("sample_level",
        [](const LSProblem& p, const py::object& family, int level, Index base_rows, DeltaMode mode,
           std::uint64_t seed, Index count, int workers) {
          py::gil_scoped_release release;
          const auto ctx = SketchContext::create(family_arg(family), p, seed);
          return sample_level(p, ctx, level, base_rows, mode, seed, 0, count, workers);
        },
        py::arg("problem"), py::arg("family"), py::arg("level"), py::arg("base_rows"),
        py::arg("mode") = DeltaMode::antithetic, py::arg("seed") = 0, py::arg("count") = 100,
        py::arg("workers") = 1);

  py::class_<FactorNorms>(m, "FactorNorms")
      .def_readonly("h_inv_sq", &FactorNorms::h_inv_sq)
      .def_readonly("h_diff_sq", &FactorNorms::h_diff_sq)
      .def_readonly("h_b_sq", &FactorNorms::h_b_sq)
      .def_readonly("x_ab_diff_sq", &FactorNorms::x_ab_diff_sq)
      .def_readonly("reconstruction_error", &FactorNorms::reconstruction_error);

  py::class_<LevelStats>(m, "LevelStats")
      .def_readonly("level", &LevelStats::level)
      .def_readonly("sketch_rows", &LevelStats::sketch_rows)
      .def_readonly("N", &LevelStats::N)
      .def_readonly("mean_delta", &LevelStats::mean_delta)
      .def_readonly("V_ell", &LevelStats::V_ell)
      .def_readonly("V_plugin", &LevelStats::V_plugin)
      .def_readonly("v_stderr", &LevelStats::v_stderr)
      .def_readonly("alpha", &LevelStats::alpha)
      .def_readonly("beta_of_delta", &LevelStats::beta_of_delta)
      .def_readonly("beta_of_x", &LevelStats::beta_of_x)
      .def_readonly("C_ell", &LevelStats::C_ell)
      .def_readonly("factor_norms", &LevelStats::factor_norms);

  m.def("level_stats", &level_stats, py::arg("samples"), py::arg("problem"));

  py::class_<EstimatorConfig>(m, "EstimatorConfig")
      .def(py::init([](const py::object& family, DeltaMode mode, int L, double eps, Index n_pilot,
                       std::uint64_t seed, Index base_rows, int workers, std::optional<double> bias_eta) {
             EstimatorConfig c;
             c.family = family_arg(family);
             c.mode = mode;
             c.L = L;
             c.eps = eps;
             c.n_pilot = n_pilot;
             c.seed = seed;
             c.base_rows = base_rows;
             c.workers = workers;
             c.bias_eta = bias_eta;
             return c;
           }),
           py::arg("family") = py::str("uniform"), py::arg("mode") = DeltaMode::antithetic, py::arg("L") = 4,
           py::arg("eps") = 1e-3, py::arg("n_pilot") = 100, py::arg("seed") = 0, py::arg("base_rows") = 0,
           py::arg("workers") = 1, py::arg("bias_eta") = std::nullopt)
      .def_readwrite("mode", &EstimatorConfig::mode)
      .def_readwrite("L", &EstimatorConfig::L)
      .def_readwrite("eps", &EstimatorConfig::eps)
      .def_readwrite("n_pilot", &EstimatorConfig::n_pilot)
      .def_readwrite("seed", &EstimatorConfig::seed)
      .def_readwrite("base_rows", &EstimatorConfig::base_rows)
      .def_readwrite("workers", &EstimatorConfig::workers)
      .def_readwrite("bias_eta", &EstimatorConfig::bias_eta)
      .def_readwrite("max_samples", &EstimatorConfig::max_samples)
      .def("validate", &EstimatorConfig::validate);

  py::class_<MLSASResult>(m, "MLSASResult")
      .def_readonly("x_hat", &MLSASResult::x_hat)
      .def_readonly("per_level", &MLSASResult::per_level)
      .def_property_readonly("total_cost", [](const MLSASResult& r) { return r.total_cost.value(); })
      .def_property_readonly("apply_cost", [](const MLSASResult& r) { return r.apply_cost.value(); })
      .def_readonly("bias_bound", &MLSASResult::bias_bound)
      .def_readonly("variance_total", &MLSASResult::variance_total)
      .def_readonly("max_level_reached", &MLSASResult::max_level_reached)
      .def_readonly("iterations", &MLSASResult::iterations);

  m.def("mlsas_estimate",
        [](const LSProblem& p, const EstimatorConfig& c) {
          py::gil_scoped_release release;
          return mlsas_estimate(p, c);
        },
        py::arg("problem"), py::arg("config"));
  m.def("adaptive_mlsas",
        [](const LSProblem& p, const EstimatorConfig& c) {
          py::gil_scoped_release release;
          return adaptive_mlsas(p, c);
        },
        py::arg("problem"), py::arg("config"));
  m.def("optimal_allocation", &optimal_allocation, py::arg("V"), py::arg("C"), py::arg("eps"));
  m.def("bias_bound", &bias_bound, py::arg("problem"), py::arg("x_L"), py::arg("s_L"), py::arg("eta"),
        py::arg("lev_max"));
  m.def("max_leverage", &max_leverage, py::arg("problem"), py::arg("seed") = 0);

  // ---------------------------------------------------------------- diagnostics
  py::class_<SlopeFit>(m, "SlopeFit")
      .def_readonly("xs", &SlopeFit::xs)
      .def_readonly("ys", &SlopeFit::ys)
      .def_readonly("slope", &SlopeFit::slope)
      .def_readonly("intercept", &SlopeFit::intercept)
      .def_readonly("r_squared", &SlopeFit::r_squared);
  m.def("fit_slope", &fit_slope, py::arg("xs"), py::arg("values"));

  py::class_<Correlation>(m, "Correlation")
      .def_readonly("rho_x", &Correlation::rho_x)
      .def_readonly("rho_ax", &Correlation::rho_ax)
      .def_readonly("pairs", &Correlation::pairs);
  m.def("cross_level_correlation", &cross_level_correlation, py::arg("lo"), py::arg("hi"), py::arg("problem"),
        py::arg("min_pairs") = 30);

  py::enum_<CostVariant>(m, "CostVariant")
      .value("classic", CostVariant::classic)
      .value("merged", CostVariant::merged)
      .value("recycled", CostVariant::recycled)
      .value("measured", CostVariant::measured);

  py::class_<CostReport>(m, "CostReport")
      .def_readonly("eps", &CostReport::eps)
      .def_readonly("variant", &CostReport::variant)
      .def_readonly("V", &CostReport::V)
      .def_readonly("C", &CostReport::C)
      .def_readonly("sqrt_vc", &CostReport::sqrt_vc)
      .def_readonly("mlsas_total", &CostReport::mlsas_total)
      .def_readonly("mc_V_L", &CostReport::mc_V_L)
      .def_readonly("mc_C_L", &CostReport::mc_C_L)
      .def_readonly("mc_total", &CostReport::mc_total)
      .def_readonly("mlsas_more_expensive", &CostReport::mlsas_more_expensive)
      .def_readonly("verdict", &CostReport::verdict);
  m.def("cost_compare", &cost_compare, py::arg("V"), py::arg("C"), py::arg("mc_V_L"), py::arg("mc_C_L"),
        py::arg("eps"), py::arg("variant") = CostVariant::recycled);
  m.def("level_costs",
        [](CostVariant v, int L, Index n, Index base_rows) {
          std::vector<double> out;
          for (Flops f : level_costs(v, L, n, base_rows)) out.push_back(f.value());
          return out;
        },
        py::arg("variant"), py::arg("max_level"), py::arg("n"), py::arg("base_rows"));
  m.def("analytic_mlsas_cost", &analytic_mlsas_cost, py::arg("V0"), py::arg("n"), py::arg("max_level"),
        py::arg("c0"), py::arg("c1"), py::arg("c2"));

  py::class_<MCTrend>(m, "MCTrend")
      .def_readonly("fit", &MCTrend::fit)
      .def_readonly("sizes", &MCTrend::sizes)
      .def_readonly("variance", &MCTrend::variance)
      .def_readonly("bound", &MCTrend::bound)
      .def_readonly("within_bound", &MCTrend::within_bound);
  m.def("mc_variance_trend",
        [](const LSProblem& p, const py::object& family, const std::vector<Index>& sizes, Index N,
           std::uint64_t seed, int workers) {
          py::gil_scoped_release release;
          return mc_variance_trend(p, family_arg(family), sizes, N, seed, workers);
        },
        py::arg("problem"), py::arg("family"), py::arg("sizes"), py::arg("N"), py::arg("seed") = 0,
        py::arg("workers") = 1);

  // ---------------------------------------------------------------- recipes
  m.def("recipe_names", &recipe_names);
  m.def("run_recipe",
        [](const std::string& recipe, const std::string& out, std::uint64_t seed, bool quick,
           const std::map<std::string, std::string>& overrides) {
          RunOptions o;
          o.recipe = recipe;
          o.out = out;
          o.seed = seed;
          o.quick = quick;
          apply_config(overrides, o);
          std::vector<std::string> given;
          for (const auto& kv : overrides) given.push_back(kv.first);
          apply_quick(o, given);
          RunOutput r;
          {
            py::gil_scoped_release release;
            r = run_recipe(o);
          }
          return py::make_tuple(r.files, r.summary);
        },
        py::arg("recipe"), py::arg("out"), py::arg("seed") = 0, py::arg("quick") = false,
        py::arg("overrides") = std::map<std::string, std::string>{},
        "Runs one recipe; overrides use the CLI flag names. Returns (files, summary).");
}
