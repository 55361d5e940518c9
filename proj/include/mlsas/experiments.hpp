#pragma once

#include "mlsas/problems.hpp"
#include "mlsas/samples.hpp"
#include "mlsas/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mlsas {

inline constexpr const char* kVersion = "0.1.0";

inline const std::vector<std::string>& recipe_names() {
  static const std::vector<std::string> names = {"fig1_variances", "fig2_factors", "table2_slopes",
                                                 "correlations",   "cost_compare", "mc_trend",
                                                 "adaptive_demo"};
  return names;
}

struct RunOptions {
  std::string recipe = "fig1_variances";
  ProblemSpec problem;
  std::string family = "uniform";
  DeltaMode mode = DeltaMode::antithetic;
  int levels = 5;
  double eps = 0.0;  // 0 picks a recipe default
  Index samples = 0;  // 0 picks a recipe default
  bool quick = false;
  std::string out = "out";
  int workers = 1;
  Index sketch_base = 0;  // 0 picks 2n (4n for cost_compare)
  std::uint64_t seed = 0;

  /// Throws InvalidSpec on unknown recipe or family, or bad numbers.
  void validate() const;
};

/// Flat "key = value" lines; '#' starts a comment. Throws ParseError.
std::map<std::string, std::string> read_config_file(const std::string& path);

/// Sets fields from config keys (the long flag names without dashes).
/// Throws InvalidSpec on unknown keys or unparsable values.
void apply_config(const std::map<std::string, std::string>& config, RunOptions& options);

/// Applies the --quick sizes to every field not in `explicit_keys`.
void apply_quick(RunOptions& options, const std::vector<std::string>& explicit_keys);

struct RunOutput {
  std::vector<std::string> files;
  std::string summary;
  Flops flops;
};

/// Runs one recipe, writing manifest.json, CSV files and summary.txt into
/// options.out. CSV contents depend only on the options.
RunOutput run_recipe(const RunOptions& options);

/// Decimal with 17 significant digits.
std::string format_double(double v);

}  // namespace mlsas
