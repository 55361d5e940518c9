#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstdint>

namespace mlsas {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Floating-point operation count under the analytic cost model.
///
/// Stored in integer thirds of a flop so the Householder formulas
/// (2sn^2 - 2/3 n^3, 10/3 n^3, ...) add up exactly.
class Flops {
 public:
  constexpr Flops() = default;

  static constexpr Flops from_thirds(std::int64_t thirds) { return Flops(thirds); }
  static constexpr Flops whole(std::int64_t flops) { return Flops(3 * flops); }

  constexpr std::int64_t thirds() const { return thirds_; }
  constexpr double value() const { return static_cast<double>(thirds_) / 3.0; }

  constexpr Flops& operator+=(Flops other) {
    thirds_ += other.thirds_;
    return *this;
  }
  friend constexpr Flops operator+(Flops lhs, Flops rhs) { return lhs += rhs; }
  friend constexpr Flops operator*(std::int64_t k, Flops f) { return Flops(k * f.thirds_); }
  friend constexpr auto operator<=>(Flops, Flops) = default;

 private:
  constexpr explicit Flops(std::int64_t thirds) : thirds_(thirds) {}
  std::int64_t thirds_ = 0;
};

/// Accumulates model flops across the calls of one solve.
class FlopCounter {
 public:
  void add(Flops f) { total_ += f; }
  Flops total() const { return total_; }

 private:
  Flops total_;
};

}  // namespace mlsas
