#pragma once

#include <optional>

#include "cdtrade/channel.hpp"
#include "cdtrade/prob.hpp"

namespace cdtrade {

struct DegradedResult {
  bool degraded = false;
  double residual = 0.0;            // max-norm residual of P12 - P1 K
  std::optional<CondDist> witness;  // K = P(z2 | z1), rows uniform on unreachable z1
};

// Least-squares row-stochastic K with P(z1, z2 | x, s_t) ~ P(z1 | x, s_t) K(z2 | z1),
// both sides averaged over P(s | s_t). degraded <=> residual <= tol.
DegradedResult check_degraded(const BCChannelSpec& spec, double tol = 1e-6);

}  // namespace cdtrade
