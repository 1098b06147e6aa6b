#include "noisebench/rng.hpp"

#include "noisebench/errors.hpp"

namespace noisebench {

std::size_t uniform_below(SplitMix64& rng, std::size_t n) {
  if (n == 0) {
    throw ContractViolation("uniform_below: n must be at least 1");
  }
  return static_cast<std::size_t>(rng.next() % n);
}

}  // namespace noisebench
