#include "mlsas/rng.hpp"

namespace mlsas {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

Philox4x32::Block Philox4x32::generate(Block ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::uint64_t StreamId::word() const {
  return (static_cast<std::uint64_t>(purpose & 0xFFu) << 56) |
         (static_cast<std::uint64_t>(level & 0xFFu) << 48) | (index & 0xFFFFFFFFFFFFull);
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Philox4x32 make_engine(std::uint64_t seed, StreamId id) { return Philox4x32(seed, id.word()); }

std::uint64_t derive_seed(std::uint64_t seed, StreamId id) {
  Philox4x32 engine(seed, id.word(), 0xFFFFFFFFull << 32);
  const std::uint64_t lo = engine();
  const std::uint64_t hi = engine();
  return mix64((hi << 32) | lo);
}

}  // namespace mlsas
