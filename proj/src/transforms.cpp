#include "mlsas/transforms.hpp"

#include "mlsas/errors.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

namespace mlsas {

namespace {

// FFTW planning is not thread-safe; execution of a finished plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Index next_power_of_two(Index n) {
  Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fwht_columns(Matrix& x) {
  const Index n = x.rows();
  if (n == 0) return;
  if ((n & (n - 1)) != 0) throw BadDimension("fwht_columns: rows must be a power of two");
  for (Index j = 0; j < x.cols(); ++j) {
    double* y = x.col(j).data();
    for (Index h = 1; h < n; h <<= 1) {
      for (Index i = 0; i < n; i += 2 * h) {
        for (Index k = i; k < i + h; ++k) {
          const double a = y[k];
          const double b = y[k + h];
          y[k] = a + b;
          y[k + h] = a - b;
        }
      }
    }
  }
  x *= 1.0 / std::sqrt(static_cast<double>(n));
}

void dct2_columns(Matrix& x) {
  const Index n = x.rows();
  const Index cols = x.cols();
  if (n == 0 || cols == 0) return;
  const int len = static_cast<int>(n);
  fftw_r2r_kind kind = FFTW_REDFT10;
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_many_r2r(1, &len, static_cast<int>(cols), x.data(), nullptr, 1, len,
                              x.data(), nullptr, 1, len, &kind, FFTW_ESTIMATE);
  }
  if (plan == nullptr) throw Error("dct2_columns: FFTW planning failed");
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  // REDFT10 is 2 sum x_j cos(pi (j + 1/2) k / n); rescale to the orthonormal DCT-II.
  x *= 1.0 / std::sqrt(2.0 * static_cast<double>(n));
  x.row(0) *= M_SQRT1_2;
}

}  // namespace mlsas
