#pragma once

#include <string>
#include <vector>

#include "cdtrade/solver_p2p.hpp"

namespace cdtrade {

inline constexpr double kNearDeterministic = 1e-3;  // nats

struct EntropyReport {
  double h_u = 0.0;        // H(U), U marginalised over S_T
  double h_u_given_st = 0.0;
  double h_x = 0.0;        // H(X) through the mapping table
  std::vector<double> p_u, p_x;
  std::vector<std::string> near_deterministic;  // names of blocks with entropy < 1e-3
};

double entropy_nats(const std::vector<double>& p);

EntropyReport entropy_report(const P2PSolver& solver, const SolverState& state);
// ISAC input distribution: only H(X) is meaningful.
EntropyReport entropy_report(const std::vector<double>& p_x);

}  // namespace cdtrade
