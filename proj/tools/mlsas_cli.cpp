#include "mlsas/errors.hpp"
#include "mlsas/experiments.hpp"
#include "mlsas/parallel.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace mlsas;
  CLI::App app{"Multilevel sketch-and-solve experiment runner"};
  RunOptions opt;
  opt.workers = default_workers();

  std::string config_path;
  std::string mode = "antithetic";
  std::string kind = "randsvd_haar";
  app.add_option("--config", config_path, "Flat key = value config file; flags override it");
  app.add_option("--recipe", opt.recipe, "fig1_variances, fig2_factors, table2_slopes, correlations, cost_compare, mc_trend or adaptive_demo");
  app.add_option("--seed", opt.seed, "Master seed (falls back to MLSQ_SEED)");
  app.add_option("--m", opt.problem.m, "Rows of A");
  app.add_option("--n", opt.problem.n, "Columns of A");
  app.add_option("--cond", opt.problem.cond, "Condition number of A");
  app.add_option("--noise", opt.problem.noise, "Noise scale on b");
  app.add_option("--kind", kind, "randsvd_haar or coherent_spike");
  app.add_option("--family", opt.family, "Sketch family");
  app.add_option("--mode", mode, "antithetic or plain");
  app.add_option("--levels", opt.levels, "Largest level L");
  app.add_option("--eps", opt.eps, "Target RMSE (0 = recipe default)");
  app.add_option("--samples", opt.samples, "Samples per level (0 = recipe default)");
  app.add_flag("--quick", opt.quick, "m = 1600, n = 25, 200 samples");
  app.add_option("--out", opt.out, "Output directory");
  app.add_option("--workers", opt.workers, "Worker threads");
  app.add_option("--sketch-base", opt.sketch_base, "s_0 in rows (0 = 2n, 4n for cost_compare)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  std::vector<std::string> given;
  try {
    if (!config_path.empty()) {
      const auto config = read_config_file(config_path);
      RunOptions from_file = opt;
      apply_config(config, from_file);
      for (const auto& [key, value] : config) given.push_back(key == "sketch_base" ? "sketch-base" : key);
      // command-line flags win over the file
      for (CLI::Option* o : app.get_options()) {
        if (o->count() == 0 || o->get_name() == "--config") continue;
        std::string key = o->get_name().substr(2);
        given.push_back(key);
        apply_config({{key, o->as<std::string>()}}, from_file);
      }
      opt = from_file;
    } else {
      for (CLI::Option* o : app.get_options()) {
        if (o->count() > 0) given.push_back(o->get_name().substr(2));
      }
      opt.mode = parse_delta_mode(mode);
      opt.problem.kind = parse_problem_kind(kind);
    }
    if (app.count("--seed") == 0 && std::find(given.begin(), given.end(), "seed") == given.end()) {
      if (const char* env = std::getenv("MLSQ_SEED")) opt.seed = std::stoull(env);
    }
    apply_quick(opt, given);
    const RunOutput result = run_recipe(opt);
    std::cout << result.summary;
    std::cout << "wrote " << result.files.size() << " files to " << opt.out << "\n";
    return 0;
  } catch (const LevelTooLarge& e) {
    std::cerr << "infeasible level: " << e.what() << "\n";
    return kNumericalError;
  } catch (const InsufficientBaseSamples& e) {
    std::cerr << "infeasible level: " << e.what() << "\n";
    return kNumericalError;
  } catch (const InvalidSpec& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  }
}
