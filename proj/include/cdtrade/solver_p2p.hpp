#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "cdtrade/channel.hpp"
#include "cdtrade/errors.hpp"
#include "cdtrade/prob.hpp"
#include "cdtrade/simplex.hpp"

namespace cdtrade {

// The five blocks of the point-to-point problem. Internal row layouts:
//   p_u      cond (r)            r = s_t for NonCausal, single row otherwise
//   p_v      cond (s_t, u, y')
//   q_u      cond (z)            posterior of u given z
//   q_v      cond (u, z)         posterior of v given (u, z)
//   est      cond (u, v, z)      estimator over s_hat
struct SolverState {
  CondDist p_u, p_v, q_u, q_v, est;
  std::size_t iteration = 0;
  double L = -std::numeric_limits<double>::infinity();
  double B = std::numeric_limits<double>::infinity();
  double rho = 0.0;
  ProximalSchedule schedule;
  std::uint32_t flags = kNoFlags;

  std::size_t nu() const { return p_u.cols(); }
  std::size_t nv() const { return p_v.cols(); }
  double gap() const { return B - L; }
};

struct CDPoint {
  double rho = 0.0;
  double rate = 0.0;        // nats
  double distortion = 0.0;
  std::size_t iterations = 0;
  double gap = 0.0;
  double L = 0.0, B = 0.0;
  CausalityMode mode = CausalityMode::NonCausal;
  std::uint32_t flags = kNoFlags;
  double certificate = std::numeric_limits<double>::quiet_NaN();
};

struct SolveOptions {
  double rho = 0.0;
  double delta = 1e-3;
  std::uint64_t seed = 0;
  ProximalSchedule schedule;
  std::size_t max_iters = 20000;
  std::optional<std::size_t> v_size;  // default |S_T| + 1
  bool keep_trace = true;
};

struct SolveResult {
  SolverState state;
  CDPoint point;
  std::vector<std::pair<double, double>> trace;  // (L, B) after every iteration
};

// Precomputes the state-free tables of an effective channel once; every
// solve on it reuses them. Thread-safe for concurrent const use.
class P2PSolver {
 public:
  explicit P2PSolver(const EffectiveChannel& eff);

  const EffectiveChannel& channel() const { return eff_; }
  std::size_t default_v_size() const { return nst_ + 1; }

  SolverState init_state(double rho, std::uint64_t seed, const ProximalSchedule& schedule,
                         std::optional<std::size_t> v_size = std::nullopt) const;

  void update_posteriors(SolverState& st) const;
  void update_pu(SolverState& st) const;
  void update_pv(SolverState& st) const;
  // Returns the number of estimator rows that moved (0 = estimator at its fixed point).
  std::size_t update_estimator(SolverState& st) const;
  // Sum over the (s_T, u, z, v) weights of the current joint: a[u][v][z][s_hat].
  std::vector<double> estimator_costs(const SolverState& st) const;

  double compute_L(const SolverState& st) const;
  double compute_B(const SolverState& st) const;

  // One full pass: p_u, p_v, estimator, then the posteriors of the new joint,
  // then L and B. The posteriors used by a pass are therefore always the exact
  // conditionals of the previous pass's joint, and L, B are evaluated at
  // posteriors that are exact for the current priors. (Evaluating B at the
  // posteriors the priors were just fitted to makes B = L after every pass,
  // which certifies nothing.) Returns the number of estimator rows that moved.
  std::size_t iterate(SolverState& st) const;

  // Joint over (s_t, u, z, v) induced by the prior blocks.
  JointTensor joint(const SolverState& st) const;
  double rate(const SolverState& st) const;
  double distortion(const SolverState& st) const;
  CDPoint point(const SolverState& st) const;

  SolveResult solve(const SolveOptions& opt) const;
  // Warm start: iterates from `start` (e.g. the solution at a neighbouring rho).
  // opt.seed is unused.
  SolveResult solve(const SolveOptions& opt, SolverState start) const;

  // Reduced table access (used by the entropy report).
  std::size_t nst() const { return nst_; }
  std::size_t nz() const { return nz_; }
  std::size_t ny() const { return ny_; }
  std::size_t nshat() const { return nshat_; }

 private:
  std::size_t prior_row(std::size_t st) const { return nc_ ? st : 0; }
  // E[st][u][v][z] = sum_shat est * dm
  void expected_costs(const SolverState& st, std::vector<double>& E) const;
  std::vector<double> expected_costs(const SolverState& st) const;
  void estimator_costs(const SolverState& st, std::vector<double>& a) const;

  // Linear terms plus log p_v, carried across passes so each is built once,
  // and scratch buffers reused between passes.
  struct Terms {
    std::vector<double> A, lpv;
    std::vector<double> E, a, lqu, lqv, G;
  };
  // A[st][u][y'][v] = sum_{z in y'} w (log qU + log qV) - rho E
  void linear_terms(const SolverState& st, Terms& t) const;
  Terms terms(const SolverState& st) const;

  void pu_step(SolverState& st, Terms& t) const;
  void pv_step(SolverState& st, Terms& t) const;  // refreshes t.lpv
  double L_of(const SolverState& st, const Terms& t) const;
  double B_of(const SolverState& st, const Terms& t) const;
  std::size_t estimator_step(SolverState& st, Terms& t) const;
  // iterate() with terms carried across passes; t must match st on entry and
  // matches it again on return.
  std::size_t step(SolverState& st, Terms& t) const;

  EffectiveChannel eff_;
  bool nc_;
  std::size_t nst_, nu_, nz_, ny_, nshat_;
  std::vector<double> c_;   // [st]            P(s_t)
  std::vector<double> w_;   // [st][u][z]      sum_s P(s,s_t) W(z|u,s_t,s)
  std::vector<double> m_;   // [st][u][y']     sum_{z in y'} w
  std::vector<double> dm_;  // [st][u][z][sh]  sum_s P(s,s_t) W d(s, sh)
  std::vector<std::vector<std::size_t>> zs_of_y_;  // y' -> list of z
};

}  // namespace cdtrade
