#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>

namespace noisebench {

/// SplitMix64 output finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

/// SplitMix64 generator. The stream is fixed by its constants so any
/// implementation in any language reproduces the same draws.
class SplitMix64 {
 public:
  static constexpr std::uint64_t kIncrement = 0x9E3779B97F4A7C15ULL;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += kIncrement;
    return mix64(state_);
  }

  /// Top 53 bits mapped to [0, 1).
  constexpr double next_unit() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  constexpr std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

/// Next draw reduced modulo n. The modulo bias is below 2^-54 for n <= 784.
/// Throws ContractViolation when n == 0.
std::size_t uniform_below(SplitMix64& rng, std::size_t n);

/// Coordinates of one perturbation stream inside an experiment.
struct SeedContext {
  std::uint64_t master = 0;
  std::uint64_t kind_id = 0;
  std::uint64_t level = 0;
  std::uint64_t rep = 0;
  std::uint64_t image_index = 0;
};

/// s <- master, then s <- mix64(s ^ f) for kind_id, level, rep, image_index in order.
constexpr std::uint64_t derive_seed(const SeedContext& ctx) noexcept {
  std::uint64_t s = ctx.master;
  for (std::uint64_t field : {ctx.kind_id, ctx.level, ctx.rep, ctx.image_index}) {
    s = mix64(s ^ field);
  }
  return s;
}

}  // namespace noisebench
