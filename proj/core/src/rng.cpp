#include "bendr/rng.hpp"

#include <cmath>
#include <numbers>

namespace bendr {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection sampling keeps the result unbiased for any n.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::derive(std::string_view name) const {
  return Rng(mix(key_ ^ fnv1a64(name)), Raw{});
}

Rng Rng::derive(std::uint64_t index) const {
  return Rng(mix(key_ ^ mix(index + 0x243f6a8885a308d3ULL)), Raw{});
}

}  // namespace bendr
