#pragma once

#include "mlsas/rng.hpp"
#include "mlsas/types.hpp"

#include <random>

namespace mlsas::detail {

inline Matrix gaussian_matrix(Index rows, Index cols, Philox4x32& engine) {
  std::normal_distribution<double> normal;
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) g(i, j) = normal(engine);
  return g;
}

inline Vector gaussian_vector(Index size, Philox4x32& engine) {
  std::normal_distribution<double> normal;
  Vector g(size);
  for (Index i = 0; i < size; ++i) g(i) = normal(engine);
  return g;
}

}  // namespace mlsas::detail
