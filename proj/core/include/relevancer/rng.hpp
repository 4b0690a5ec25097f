#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace relevancer {

/// xoshiro256** (Blackman & Vigna), seeded through splitmix64. All sampling
/// in the library goes through this generator so that seeded outputs are
/// identical on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next() noexcept;
  // Uniform in [0, bound). bound must be > 0. Unbiased (rejection).
  std::uint64_t uniform(std::uint64_t bound) noexcept;
  // Uniform in [0, 1) with 53 bits of resolution.
  double unit() noexcept;

 private:
  std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;
// Derives an independent stream seed from a base seed and a text key.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) noexcept;

}  // namespace relevancer
