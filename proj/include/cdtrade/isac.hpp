#pragma once

#include <cstdint>
#include <vector>

#include "cdtrade/channel.hpp"
#include "cdtrade/simplex.hpp"
#include "cdtrade/solver_p2p.hpp"

namespace cdtrade {

// Receiver 1 is a radar that sees the transmitted symbol, receiver 2 a
// communication user, no side information at the transmitter. Solves
//   max_{P_X} I(X; Z2) - rho E[d(S, h*(X, Z1))]
// by block ascent over P_X, P(x | z2) and the estimator.
struct IsacOptions {
  double delta = 1e-9;
  std::uint64_t seed = 0;
  ProximalSchedule schedule;
  std::size_t max_iters = 100000;
};

struct IsacSolution {
  CDPoint point;
  std::vector<double> p_x;
  std::vector<std::pair<double, double>> trace;  // (L, B) per pass
};

// Throws ModeViolation when |S_T| != 1 or some z1 is reachable from two inputs.
IsacSolution solve_isac(const BCChannelSpec& spec, double rho, const IsacOptions& opt = {});
std::vector<CDPoint> solve_isac_tradeoff(const BCChannelSpec& spec, const std::vector<double>& rhos,
                                         double delta = 1e-9, std::uint64_t seed = 0);

}  // namespace cdtrade
