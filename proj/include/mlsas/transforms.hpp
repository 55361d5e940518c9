#pragma once

#include "mlsas/types.hpp"

namespace mlsas {

/// In-place orthonormal Walsh-Hadamard transform (Sylvester ordering) of
/// every column. Rows must be a power of two.
void fwht_columns(Matrix& x);

/// In-place orthonormal DCT-II of every column (any row count).
void dct2_columns(Matrix& x);

/// Smallest power of two >= n.
Index next_power_of_two(Index n);

}  // namespace mlsas
