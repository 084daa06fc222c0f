#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cdtrade {

// SplitMix64 in counter form: draw k is mix(seed + (k+1)*gamma). Same bits on
// every platform, which is all the builders and initialisers need.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  // uniform on [0,1) with 53 random bits
  double uniform();
  // uniform on (0,1], safe for log
  double uniform_open0();

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t state_;
};

// Derive an independent stream seed from a master seed and a tuple of indices.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

// Symmetric Dirichlet(1) draw of length n.
std::vector<double> dirichlet1(SplitMix64& rng, std::size_t n);

}  // namespace cdtrade
