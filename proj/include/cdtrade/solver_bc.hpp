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

// Weighted-sum problem of the degraded broadcast channel with decoder 2 in
// communication-only mode and no feedback from it. Row layouts:
//   p_u2   cond (r)                 r = s_t for NonCausal, single row otherwise
//   p_u1   cond (r, u2)
//   p_v    cond (s_t, u2, u1, y')
//   q_u2   cond (z2)
//   q_u1   cond (u2, z1)
//   q_v    cond (u2, u1, z1)
//   est    cond (u2, u1, v, z1)     over s_hat (receiver 1)
struct BCSolverState {
  CondDist p_u2, p_u1, p_v, q_u2, q_u1, q_v, est;
  double alpha = 1.0;
  double rho = 0.0;
  std::size_t iteration = 0;
  double L = -std::numeric_limits<double>::infinity();
  double B = std::numeric_limits<double>::infinity();
  ProximalSchedule schedule;
  std::uint32_t flags = kNoFlags;

  std::size_t nu2() const { return p_u2.cols(); }
  std::size_t nu1() const { return p_u1.cols(); }
  std::size_t nv() const { return p_v.cols(); }
  double gap() const { return B - L; }
};

struct RegionPoint {
  double alpha = 0.0;
  double rho1 = 0.0;
  double r1 = 0.0;    // nats
  double r0r2 = 0.0;  // nats, R0 + R2
  double d1 = 0.0;
  std::size_t iterations = 0;
  double gap = 0.0;
  double L = 0.0, B = 0.0;
  std::uint32_t flags = kNoFlags;

  double weighted() const { return alpha * r1 + (1.0 - alpha) * r0r2; }
};

struct BCSolveOptions {
  double alpha = 1.0;
  double rho = 0.0;
  double delta = 1e-3;
  std::uint64_t seed = 0;
  ProximalSchedule schedule;
  std::size_t max_iters = 20000;
  std::optional<std::size_t> u2_size;  // default min(|X||S_T|, |Z2|) + 3
  std::optional<std::size_t> v_size;   // default |S_T| + 2
  bool keep_trace = true;
};

struct BCSolveResult {
  BCSolverState state;
  RegionPoint point;
  std::vector<std::pair<double, double>> trace;  // (L, B) per pass
};

class BCSolver {
 public:
  explicit BCSolver(const BCEffectiveChannel& eff);

  const BCEffectiveChannel& channel() const { return eff_; }
  std::size_t default_u2_size() const;
  std::size_t default_v_size() const { return nst_ + 2; }

  BCSolverState init_state(double alpha, double rho, std::uint64_t seed,
                           const ProximalSchedule& schedule,
                           std::optional<std::size_t> u2_size = std::nullopt,
                           std::optional<std::size_t> v_size = std::nullopt) const;

  // Pass order: p_u1, p_u2, p_v, estimator, posteriors, then L and B at the
  // refreshed posteriors. Returns the number of estimator rows that moved.
  std::size_t iterate(BCSolverState& st) const;
  void update_posteriors(BCSolverState& st) const;
  double compute_L(const BCSolverState& st) const;
  double compute_B(const BCSolverState& st) const;

  double rate1(const BCSolverState& st) const;
  double rate02(const BCSolverState& st) const;
  double distortion(const BCSolverState& st) const;
  RegionPoint point(const BCSolverState& st) const;

  BCSolveResult solve(const BCSolveOptions& opt) const;

 private:
  struct Terms {
    std::vector<double> E, A, F2, lpv, lqu2, lqu1, lqv, G1, a;
  };
  std::size_t prior_row(std::size_t st) const { return nc_ ? st : 0; }
  void linear_terms(const BCSolverState& S, Terms& t) const;
  Terms terms(const BCSolverState& S) const;
  void row_values(const BCSolverState& S, Terms& t) const;  // G1[st][u2][u1]
  std::size_t pu1_step(BCSolverState& S, Terms& t) const;
  std::size_t pu2_step(BCSolverState& S, Terms& t) const;
  std::size_t pv_step(BCSolverState& S, Terms& t) const;
  std::size_t estimator_step(BCSolverState& S, Terms& t) const;
  double L_of(const BCSolverState& S, const Terms& t) const;
  double B_of(const BCSolverState& S, const Terms& t) const;
  std::size_t step(BCSolverState& S, Terms& t) const;
  JointTensor joint1(const BCSolverState& S) const;  // (s_t, u2, u1, z1, v)

  BCEffectiveChannel eff_;
  bool nc_;
  std::size_t nst_, nu1_, nz1_, nz2_, ny_, nshat_;
  std::vector<double> c_;    // [st]
  std::vector<double> w1_;   // [st][u1][z1]
  std::vector<double> w2_;   // [st][u1][z2]
  std::vector<double> m_;    // [st][u1][y']
  std::vector<double> dm_;   // [st][u1][z1][sh]
};

// Cartesian (alpha, rho1) sweep with best-of-restarts per cell.
struct RegionSweepOptions {
  std::vector<double> alphas, rhos;
  BCSolveOptions base;
  std::size_t restarts = 1;
  std::size_t jobs = 1;
};

struct RegionCell {
  std::size_t alpha_index = 0, rho_index = 0;
  RegionPoint point;
  std::vector<double> restart_weighted;  // alpha*R1 + (1-alpha)*R0R2 - rho*D1 per restart
  std::size_t bound_violations = 0, ascent_violations = 0;
  double seconds = 0.0;
};

struct SliceViolation {
  std::size_t cell = 0, against = 0;
  double excess = 0.0;
};

struct RegionSweep {
  std::vector<RegionCell> cells;  // alpha-major
  // Per-alpha upper envelope of the weighted sum against D1: (D1, J) sorted by D1,
  // dominated points removed.
  std::vector<std::vector<std::pair<double, double>>> envelope;
};

RegionSweep sweep_region(const BCSolver& solver, const RegionSweepOptions& opt);

// Each cell solved for weight alpha must dominate, in alpha-weighted sum,
// every other point of the cloud whose D1 does not exceed its own (the
// supporting-hyperplane property of a convex slice). Reports cells whose
// weighted sum falls short by more than tol.
std::vector<SliceViolation> check_region_slices(const std::vector<RegionPoint>& pts, double tol,
                                                double dtol = 1e-9);

}  // namespace cdtrade
