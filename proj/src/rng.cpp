#include "cdtrade/rng.hpp"

#include <cmath>

namespace cdtrade {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t SplitMix64::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::next() {
  state_ += kGamma;
  return mix(state_);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SplitMix64::uniform_open0() {
  return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) {
  std::uint64_t h = SplitMix64::mix(master + kGamma);
  h = SplitMix64::mix(h ^ (a + 0x632BE59BD9B4E019ULL));
  h = SplitMix64::mix(h ^ (b + 0x85157AF5ULL * kGamma));
  h = SplitMix64::mix(h ^ (c + 0xD6E8FEB86659FD93ULL));
  return h;
}

std::vector<double> dirichlet1(SplitMix64& rng, std::size_t n) {
  std::vector<double> out(n);
  double total = 0.0;
  for (auto& x : out) {
    x = -std::log(rng.uniform_open0());
    total += x;
  }
  if (total <= 0.0) {  // every draw was exactly 1.0; astronomically unlikely
    for (auto& x : out) x = 1.0 / static_cast<double>(n);
    return out;
  }
  for (auto& x : out) x /= total;
  return out;
}

}  // namespace cdtrade
