#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cdtrade/prob.hpp"

namespace cdtrade {

enum class CausalityMode { StrictlyCausal, Causal, NonCausal };

std::string to_string(CausalityMode m);
// accepts sc|c|nc and the long names
CausalityMode parse_mode(const std::string& s);

// Free-form reporting labels, e.g. "theta_deg" -> grid values. Never used by solvers.
using Labels = std::map<std::string, std::vector<double>>;

struct ChannelSizes {
  std::size_t s = 0, s_t = 0, x = 0, z = 0, s_hat = 0, y_fb = 0;
  bool operator==(const ChannelSizes&) const = default;
};

struct ChannelSpec {
  ChannelSizes sizes;
  ProbVec p_s;
  CondDist p_st_given_s;   // cond (s), out s_t
  CondDist p_z_given_xs;   // cond (x, s), out z
  std::vector<std::size_t> feedback_map;  // z -> y'
  Matrix distortion;       // |S| x |S_hat|
  Labels labels;
  std::uint64_t seed = 0;

  // Throws ValidationError naming the violated invariant.
  void validate() const;
};

struct BCChannelSizes {
  std::size_t s = 0, s_t = 0, x = 0, z1 = 0, z2 = 0, s_hat = 0, y_fb = 0;
  bool operator==(const BCChannelSizes&) const = default;
};

// Two-receiver channel. Feedback only from receiver 1; receiver 2 has none.
struct BCChannelSpec {
  BCChannelSizes sizes;
  ProbVec p_s;
  CondDist p_st_given_s;
  CondDist p_z1z2_given_xs;  // cond (x, s), out (z1, z2) row-major
  std::vector<std::size_t> feedback_map;  // z1 -> y'
  Matrix distortion;         // d1: |S| x |S_hat|
  Labels labels;
  std::uint64_t seed = 0;

  void validate() const;

  // Receiver-1 view: point-to-point spec over Z1 with the same state and d1.
  ChannelSpec receiver1() const;
  // P(z2 | x, s)
  CondDist p_z2_given_xs() const;
};

inline constexpr std::size_t kDefaultStrategyCap = 4096;

// Shannon-strategy expansion. Strategy u is a map s_t -> x stored in
// mapping_table[u][s_t]; enumeration is little-endian in s_t
// (u = sum_k x_k |X|^k).
struct EffectiveChannel {
  std::vector<std::vector<std::size_t>> mapping_table;
  CondDist p_z_given_u_st_s;  // cond (u, s_t, s), out z
  CausalityMode mode = CausalityMode::NonCausal;
  bool truncated = false;
  std::shared_ptr<const ChannelSpec> origin;

  std::size_t num_strategies() const { return mapping_table.size(); }
  const ChannelSpec& spec() const { return *origin; }
};

EffectiveChannel expand_shannon_strategy(const ChannelSpec& spec, CausalityMode mode,
                                         std::optional<std::size_t> cap = std::nullopt,
                                         bool allow_truncation = false);

// Mapping table only; shared by the p2p and broadcast expansions.
std::vector<std::vector<std::size_t>> strategy_table(std::size_t nx, std::size_t nst,
                                                     CausalityMode mode, std::size_t cap,
                                                     bool allow_truncation, bool* truncated);

struct BCEffectiveChannel {
  std::vector<std::vector<std::size_t>> mapping_table;  // for U1
  CondDist p_z1z2_given_u_st_s;                        // cond (u1, s_t, s), out (z1, z2)
  CausalityMode mode = CausalityMode::NonCausal;
  bool truncated = false;
  std::shared_ptr<const BCChannelSpec> origin;

  std::size_t num_strategies() const { return mapping_table.size(); }
  const BCChannelSpec& spec() const { return *origin; }
};

BCEffectiveChannel expand_shannon_strategy(const BCChannelSpec& spec, CausalityMode mode,
                                           std::optional<std::size_t> cap = std::nullopt,
                                           bool allow_truncation = false);

}  // namespace cdtrade
