#pragma once

#include "mlsas/rng.hpp"
#include "mlsas/types.hpp"

#include <string>
#include <vector>

namespace mlsas {

enum class DeltaMode { antithetic, plain, recycled };

std::string to_string(DeltaMode mode);
DeltaMode parse_delta_mode(const std::string& text);

/// One sample of the level difference Delta x^(l).
struct LevelDelta {
  int level = 0;
  Index sketch_rows = 0;  // s_l of the fine solution
  Vector delta_x;
  Vector fine_x;
  /// Empty at level 0; {x_a} in plain mode; {x_a, x_b} otherwise.
  std::vector<Vector> coarse_parts;
  DeltaMode mode = DeltaMode::antithetic;
  /// Model cost of the QR solves only.
  Flops cost;
  /// Model cost of forming the sketched systems, logged separately.
  Flops apply_cost;
  StreamId stream;
  /// 2 when the first draw was rank deficient and the resample stream was used.
  int attempts = 1;
};

}  // namespace mlsas
