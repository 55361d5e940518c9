#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace mlsas {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The 128-bit counter is split into a 64-bit stream word and a 64-bit
/// position. Distinct (key, stream) pairs never overlap, which lets every
/// (level, sample, half) draw from its own stream in any order.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox4x32(std::uint64_t key, std::uint64_t stream, std::uint64_t position = 0)
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
        stream_(stream),
        position_(position) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (used_ == 4) {
      buffer_ = generate({static_cast<std::uint32_t>(position_),
                          static_cast<std::uint32_t>(position_ >> 32),
                          static_cast<std::uint32_t>(stream_),
                          static_cast<std::uint32_t>(stream_ >> 32)},
                         key_);
      ++position_;
      used_ = 0;
    }
    return buffer_[used_++];
  }

  /// The raw bijection: ten rounds over one counter block.
  static Block generate(Block ctr, Key key);

 private:
  Key key_;
  std::uint64_t stream_;
  std::uint64_t position_;
  Block buffer_{};
  int used_ = 4;
};

/// Identifies one random stream under a master seed.
///
/// `purpose` separates unrelated consumers (problem generation, sketch
/// draws, resampling attempts); `level` and `index` name the MLSAS sample.
struct StreamId {
  std::uint32_t purpose = 0;
  std::uint32_t level = 0;
  std::uint64_t index = 0;

  std::uint64_t word() const;
  friend bool operator==(const StreamId&, const StreamId&) = default;
};

namespace purpose {
inline constexpr std::uint32_t problem_u = 1;
inline constexpr std::uint32_t problem_v = 2;
inline constexpr std::uint32_t problem_g = 3;
inline constexpr std::uint32_t problem_h = 4;
inline constexpr std::uint32_t context = 10;
inline constexpr std::uint32_t sample = 20;
inline constexpr std::uint32_t resample = 21;
inline constexpr std::uint32_t leverage_approx = 30;
inline constexpr std::uint32_t base_sample = 40;
}  // namespace purpose

/// splitmix64 finalizer, used to fold structured ids into key material.
std::uint64_t mix64(std::uint64_t x);

/// Engine positioned at the start of `id` under `seed`.
Philox4x32 make_engine(std::uint64_t seed, StreamId id);

/// Derives a child seed; used where one stream fans out into sub-streams.
std::uint64_t derive_seed(std::uint64_t seed, StreamId id);

}  // namespace mlsas
