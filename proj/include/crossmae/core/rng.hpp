#pragma once

#include <cstdint>
#include <string_view>

namespace crossmae::rng {

// Deterministic, splittable random stream. All randomness in the project flows
// from a root seed split into named substreams, so independent components can
// sample in parallel without sharing generator state.
//
// Distributions are hand-rolled (not std::*_distribution) so that a given
// (seed, name) pair produces the same values on every platform and compiler.
class Stream {
 public:
  explicit Stream(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0,1) with 53 bits of mantissa.
  double uniform();
  // Uniform on (0,1); never returns 0 (safe for logs).
  double uniform_pos();
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  // Standard normal via the polar method.
  double normal();
  // Gamma(alpha, 1) via Marsaglia-Tsang; alpha > 0.
  double gamma(double alpha);
  // Beta(a, b) as Ga/(Ga+Gb); a, b > 0.
  double beta(double a, double b);

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Derives a child seed from (seed, name, indices). Stable across runs.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name,
                          std::uint64_t a = 0, std::uint64_t b = 0,
                          std::uint64_t c = 0);

inline Stream derive(std::uint64_t seed, std::string_view name,
                     std::uint64_t a = 0, std::uint64_t b = 0,
                     std::uint64_t c = 0) {
  return Stream(derive_seed(seed, name, a, b, c));
}

}  // namespace crossmae::rng
