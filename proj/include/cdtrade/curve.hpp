#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "cdtrade/solver_p2p.hpp"

namespace cdtrade {

struct CurveViolation {
  std::string kind;  // "monotone" or "concave"
  std::size_t index = 0;  // index into the merged point list
  double amount = 0.0;    // how far past the tolerance
};

struct CurveShapeReport {
  std::vector<CurveViolation> violations;
  std::vector<std::pair<double, double>> merged;  // (D, R) after merging equal D
  bool ok() const { return violations.empty(); }
};

// Points whose distortions agree within dtol are merged (max rate kept);
// then rates must be nondecreasing in D and every interior point must lie on
// or above the chord of its neighbours, both within tol.
CurveShapeReport check_curve_shape(std::vector<std::pair<double, double>> d_r, double tol,
                                   double dtol = 1e-9);

struct TraceCheck {
  std::size_t bound_violations = 0;    // iterations with B < L - bound_tol
  std::size_t ascent_violations = 0;   // passes where L dropped by more than ascent_tol
  double worst_bound = 0.0;            // min over iterations of B - L
  double worst_drop = 0.0;             // max decrease of L between passes
  bool ok() const { return bound_violations == 0 && ascent_violations == 0; }
};

TraceCheck check_trace(const std::vector<std::pair<double, double>>& trace,
                       double bound_tol = 1e-9, double ascent_tol = 1e-10);

struct SweepOptions {
  std::vector<double> rhos;
  SolveOptions base;         // rho and seed are overridden per point
  std::size_t restarts = 0;  // 0 = default for the channel
  std::size_t jobs = 1;
  // After the random restarts, re-solve every point starting from the
  // solution of its rho-neighbours, sweeping up and down the grid until no
  // point improves (at most max_warm_rounds round trips).
  bool warm_starts = true;
  std::size_t max_warm_rounds = 1;
  // Iteration cap for warm solves; a capped warm solve is discarded. 0 = base.max_iters.
  std::size_t warm_max_iters = 1000;
  // Extra starting states, one per rho (or none), solved after the restarts.
  // A capped seed solve is never kept. seed_max_iters = 0 means base.max_iters;
  // otherwise it is a budget like warm_max_iters.
  std::vector<SolverState> seeds;
  std::size_t seed_max_iters = 0;
};

struct SweepPoint {
  CDPoint point;
  SolverState state;
  std::vector<double> restart_L;  // final L of every restart, in restart order
  std::size_t best_restart = 0;
  std::vector<double> warm_L;     // final L of every warm-start solve
  bool from_warm = false;         // best solution came from a neighbour's state
  double seed_L = 0.0;            // final L from opt.seeds[i], when given
  bool from_seed = false;
  TraceCheck trace;               // merged over all restarts
  std::size_t solves = 0;         // restarts plus warm starts
  std::size_t capped = 0;         // restarts or seed solves that stopped at max_iters
  std::size_t warm_capped = 0;    // budgeted warm or seed solves that hit their cap (discarded)
  std::size_t open_gaps = 0;      // uncapped solves that stopped with B - L > delta
  double seconds = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;  // sorted by distortion
  CurveShapeReport shape;
};

// 5 for NonCausal with |S_T| > 1, else 1.
std::size_t default_restarts(const EffectiveChannel& eff);

// 0 plus 20 log-spaced values over [1e-2, 1e3].
std::vector<double> default_rho_grid();
std::vector<double> log_grid(double lo, double hi, std::size_t n);

SweepResult sweep_curve(const P2PSolver& solver, const SweepOptions& opt);

// Re-expresses a solution on `from` as a state of `to` when from's mode is
// nested in to's (SC in C in NC): each strategy of `from` maps to the
// identical strategy of `to`, the rest get the solver's floor mass. Posteriors, L
// and B are recomputed on `to`, so L carries over unchanged.
// Throws ModeViolation when the modes are not nested.
SolverState embed_state(const EffectiveChannel& from, const SolverState& st, const P2PSolver& to);

struct NestedSweep {
  std::vector<CausalityMode> modes;
  std::vector<SweepResult> results;  // one per mode
};

// Sweeps SC, then C seeded with the embedded SC solutions, then NC seeded
// with the C ones, stopping at `top`. By ascent from the embedded start,
// L is ordered across modes at every rho, provided the seeded solves run
// uncapped (opt.seed_max_iters = 0).
NestedSweep sweep_nested(const ChannelSpec& spec, CausalityMode top, const SweepOptions& opt,
                         std::size_t nc_restarts = 0);

}  // namespace cdtrade
