#include "crossmae/core/rng.hpp"

#include <cmath>

#include "crossmae/core/errors.hpp"

namespace crossmae::rng {

namespace {

// splitmix64: the mixing function both for stream advance and seed derivation.
std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Stream::Stream(std::uint64_t seed) : state_(seed) {
  // Burn a few outputs so nearby seeds decorrelate.
  for (int i = 0; i < 4; ++i) (void)splitmix64(state_);
}

std::uint64_t Stream::next_u64() { return splitmix64(state_); }

double Stream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Stream::uniform_pos() {
  double u = uniform();
  while (u <= 0.0) u = uniform();
  return u;
}

std::uint64_t Stream::below(std::uint64_t n) {
  if (n == 0) throw InternalError("rng::below(0)");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

double Stream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

double Stream::gamma(double alpha) {
  if (!(alpha > 0.0)) throw ConfigError("gamma: alpha must be > 0");
  if (alpha < 1.0) {
    // Boost: Gamma(a) = Gamma(a+1) * U^(1/a)
    const double g = gamma(alpha + 1.0);
    return g * std::pow(uniform_pos(), 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double Stream::beta(double a, double b) {
  const double ga = gamma(a);
  const double gb = gamma(b);
  const double s = ga + gb;
  if (s <= 0.0) return 0.5;  // both draws underflowed; alpha extremely small
  return ga / s;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name,
                          std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t x = seed ^ fnv1a(name);
  std::uint64_t h = splitmix64(x);
  x ^= a + 0x9e3779b97f4a7c15ULL;
  h ^= splitmix64(x);
  x ^= b + 0xd1b54a32d192ed03ULL;
  h ^= splitmix64(x);
  x ^= c + 0x8cb92ba72f3d8dd7ULL;
  h ^= splitmix64(x);
  return h;
}

}  // namespace crossmae::rng
