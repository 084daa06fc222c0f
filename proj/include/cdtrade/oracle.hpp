#pragma once

// Independent verifiers. Nothing in here calls into the solvers' numerics:
// every quantity is recomputed from the channel definition with plain loops.

#include <cstddef>
#include <string>
#include <vector>

#include "cdtrade/channel.hpp"
#include "cdtrade/prob.hpp"
#include "cdtrade/solver_p2p.hpp"

namespace cdtrade::oracle {

using Kernel = std::vector<std::vector<double>>;  // [x][z]

struct BAResult {
  double capacity = 0.0;  // nats, midpoint of the final bracket
  double lower = 0.0, upper = 0.0;
  std::vector<double> p_x;
  std::size_t iterations = 0;
};

// Classical alternating maximization with the max-divergence upper bound;
// stops once upper - lower <= delta.
BAResult ba_capacity(const Kernel& w, double delta = 1e-10, std::size_t max_iters = 2'000'000);
Kernel kernel_rows(const CondDist& w);

// max over P_X of sum_s P(s) I(X;Y|S=s), kernels[s][x][y].
BAResult ba_capacity_given_state(const std::vector<Kernel>& kernels, const std::vector<double>& p_s,
                                 double delta = 1e-10, std::size_t max_iters = 2'000'000);

// joint[s][context]; returns per-context argmin_shat sum_s joint d(s, shat),
// lowest index on ties.
std::vector<std::size_t> brute_force_estimator(const std::vector<std::vector<double>>& joint,
                                               const Matrix& d);

struct MinDistortion {
  std::size_t x = 0;
  double value = 0.0;
  std::vector<double> per_x;
};

// min over deterministic x of E[d(S, h*(x, Z))]; needs |S_T| = 1.
MinDistortion min_distortion_deterministic_x(const ChannelSpec& spec);

// Full Lagrangian of the point-to-point problem evaluated over the complete
// joint of (s, s_t, u, z, v), given arbitrary (not necessarily normalized)
// block values. The blocks use the solver's row layouts.
double lagrangian(const EffectiveChannel& eff, const SolverState& state);

// Analytic partial derivatives of lagrangian() with respect to every entry of
// every block, in the same layout as the block data.
struct Gradient {
  std::vector<double> p_u, p_v, q_u, q_v, est;
};
Gradient lagrangian_gradient(const EffectiveChannel& eff, const SolverState& state);

struct BlockResidual {
  std::string block;
  double residual = 0.0;
  std::size_t worst_row = 0;
};

struct StationarityCertificate {
  std::vector<BlockResidual> blocks;
  double residual = 0.0;        // max over blocks
  double fd_max_rel_error = 0.0;  // finite-difference vs analytic
  std::size_t fd_checked = 0;
};

// Support threshold: entries above `support` count as on-support. Finite
// differences (central, step 1e-6) are checked on up to fd_samples entries
// with value >= 1e-5; fd_samples = 0 skips the check.
StationarityCertificate stationarity_certificate(const EffectiveChannel& eff, const SolverState& state,
                                                 double support = 1e-6, std::size_t fd_samples = 64);

// Posterior-optimal estimator for the given prior blocks, over (u, v, z) contexts:
// joint[s][(u*nv + v)*nz + z].
std::vector<std::vector<double>> joint_s_given_context(const EffectiveChannel& eff,
                                                       const SolverState& state);

struct GridResult {
  double best_L = 0.0;
  std::size_t points = 0;
  std::vector<double> best_p_u, best_p_v;
};

// Grid search over the prior blocks (p_u, p_v) with `resolution` steps per
// simplex edge; posteriors and estimator are exact at every grid point.
// Throws TooLarge when the free dimension exceeds 6 or the grid exceeds max_points.
GridResult exhaustive_small_solver(const EffectiveChannel& eff, double rho, std::size_t resolution,
                                   std::size_t v_size = 1, std::size_t max_points = 5'000'000);

}  // namespace cdtrade::oracle
