#include "cdtrade/curve.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>

#include "cdtrade/errors.hpp"
#include "cdtrade/parallel.hpp"
#include "cdtrade/rng.hpp"

namespace cdtrade {

CurveShapeReport check_curve_shape(std::vector<std::pair<double, double>> d_r, double tol,
                                   double dtol) {
  CurveShapeReport rep;
  std::sort(d_r.begin(), d_r.end());
  for (const auto& [d, r] : d_r) {
    if (!rep.merged.empty() && d - rep.merged.back().first <= dtol) {
      rep.merged.back().second = std::max(rep.merged.back().second, r);
      continue;
    }
    rep.merged.emplace_back(d, r);
  }
  const auto& m = rep.merged;
  for (std::size_t i = 1; i < m.size(); ++i) {
    double drop = m[i - 1].second - m[i].second;
    if (drop > tol) rep.violations.push_back({"monotone", i, drop - tol});
  }
  for (std::size_t i = 1; i + 1 < m.size(); ++i) {
    const auto [d0, r0] = m[i - 1];
    const auto [d1, r1] = m[i];
    const auto [d2, r2] = m[i + 1];
    double chord = r0 + (r2 - r0) * (d1 - d0) / (d2 - d0);
    double below = chord - r1;
    if (below > tol) rep.violations.push_back({"concave", i, below - tol});
  }
  return rep;
}

TraceCheck check_trace(const std::vector<std::pair<double, double>>& trace, double bound_tol,
                       double ascent_tol) {
  TraceCheck tc;
  tc.worst_bound = INFINITY;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto [L, B] = trace[i];
    tc.worst_bound = std::min(tc.worst_bound, B - L);
    if (B < L - bound_tol) ++tc.bound_violations;
    if (i > 0) {
      double drop = trace[i - 1].first - L;
      tc.worst_drop = std::max(tc.worst_drop, drop);
      if (drop > ascent_tol) ++tc.ascent_violations;
    }
  }
  return tc;
}

std::size_t default_restarts(const EffectiveChannel& eff) {
  return eff.mode == CausalityMode::NonCausal && eff.spec().sizes.s_t > 1 ? 5 : 1;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0) || !(hi >= lo) || n == 0) throw ConfigError("log grid needs 0 < lo <= hi and n >= 1");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    g[i] = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
  }
  return g;
}

std::vector<double> default_rho_grid() {
  std::vector<double> g{0.0};
  auto rest = log_grid(1e-2, 1e3, 20);
  g.insert(g.end(), rest.begin(), rest.end());
  return g;
}

namespace {

void tally(SweepPoint& sp, const SolveResult& r, double delta, bool warm = false) {
  ++sp.solves;
  if ((r.point.flags & kMaxIters) && warm) ++sp.warm_capped;
  else if (r.point.flags & kMaxIters) ++sp.capped;
  else if (r.point.gap > delta) ++sp.open_gaps;
}

}  // namespace

SweepResult sweep_curve(const P2PSolver& solver, const SweepOptions& opt) {
  if (opt.rhos.empty()) throw ConfigError("rho grid is empty");
  for (double r : opt.rhos)
    if (!(r >= 0.0)) throw ConfigError("rho grid values must be >= 0");
  const std::size_t restarts = opt.restarts ? opt.restarts : default_restarts(solver.channel());
  if (!opt.seeds.empty() && opt.seeds.size() != opt.rhos.size())
    throw ConfigError("sweep: expected one seed state per rho");

  SweepResult res;
  res.points.resize(opt.rhos.size());
  parallel_for(opt.rhos.size(), opt.jobs, [&](std::size_t i) {
    auto t0 = std::chrono::steady_clock::now();
    SweepPoint& sp = res.points[i];
    SolveResult best;
    bool have = false;
    for (std::size_t k = 0; k < restarts; ++k) {
      SolveOptions o = opt.base;
      o.rho = opt.rhos[i];
      o.seed = derive_seed(opt.base.seed, i, k);
      SolveResult r = solver.solve(o);
      TraceCheck tc = check_trace(r.trace);
      sp.trace.bound_violations += tc.bound_violations;
      sp.trace.ascent_violations += tc.ascent_violations;
      sp.trace.worst_bound = k == 0 ? tc.worst_bound : std::min(sp.trace.worst_bound, tc.worst_bound);
      sp.trace.worst_drop = std::max(sp.trace.worst_drop, tc.worst_drop);
      tally(sp, r, o.delta);
      sp.restart_L.push_back(r.state.L);
      if (!have || r.state.L > best.state.L) {
        best = std::move(r);
        sp.best_restart = k;
        have = true;
      }
    }
    if (!opt.seeds.empty()) {
      SolveOptions o = opt.base;
      o.rho = opt.rhos[i];
      if (opt.seed_max_iters) o.max_iters = std::min(o.max_iters, opt.seed_max_iters);
      SolveResult r = solver.solve(o, opt.seeds[i]);
      TraceCheck tc = check_trace(r.trace);
      sp.trace.bound_violations += tc.bound_violations;
      sp.trace.ascent_violations += tc.ascent_violations;
      sp.trace.worst_bound = std::min(sp.trace.worst_bound, tc.worst_bound);
      sp.trace.worst_drop = std::max(sp.trace.worst_drop, tc.worst_drop);
      const bool capped = r.point.flags & kMaxIters;
      tally(sp, r, o.delta, opt.seed_max_iters != 0);
      sp.seed_L = r.state.L;
      if (!capped && r.state.L > best.state.L) {
        best = std::move(r);
        sp.from_seed = true;
      }
    }
    sp.point = best.point;
    sp.state = std::move(best.state);
    sp.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  if (opt.warm_starts && opt.rhos.size() > 1) {
    std::vector<std::size_t> order(opt.rhos.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return opt.rhos[a] < opt.rhos[b]; });
    // true if point i improved from j's state
    auto try_from = [&](std::size_t i, std::size_t j) {
      auto t0 = std::chrono::steady_clock::now();
      SweepPoint& sp = res.points[i];
      SolveOptions o = opt.base;
      o.rho = opt.rhos[i];
      if (opt.warm_max_iters) o.max_iters = std::min(o.max_iters, opt.warm_max_iters);
      SolveResult r = solver.solve(o, res.points[j].state);
      TraceCheck tc = check_trace(r.trace);
      sp.trace.bound_violations += tc.bound_violations;
      sp.trace.ascent_violations += tc.ascent_violations;
      sp.trace.worst_bound = std::min(sp.trace.worst_bound, tc.worst_bound);
      sp.trace.worst_drop = std::max(sp.trace.worst_drop, tc.worst_drop);
      tally(sp, r, o.delta, true);
      sp.warm_L.push_back(r.state.L);
      // a capped warm solve never replaces a converged point
      bool better = !(r.point.flags & kMaxIters) && r.state.L > sp.state.L + 1e-12 * std::max(1.0, std::abs(sp.state.L));
      if (better) {
        sp.point = r.point;
        sp.state = std::move(r.state);
        sp.from_warm = true;
      }
      sp.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return better;
    };
    for (std::size_t round = 0; round < opt.max_warm_rounds; ++round) {
      bool changed = false;
      for (std::size_t k = 1; k < order.size(); ++k) changed |= try_from(order[k], order[k - 1]);
      for (std::size_t k = order.size() - 1; k-- > 0;) changed |= try_from(order[k], order[k + 1]);
      if (!changed) break;
    }
  }

  std::stable_sort(res.points.begin(), res.points.end(), [](const SweepPoint& a, const SweepPoint& b) {
    return a.point.distortion < b.point.distortion;
  });
  std::vector<std::pair<double, double>> dr;
  for (const auto& p : res.points) dr.emplace_back(p.point.distortion, p.point.rate);
  res.shape = check_curve_shape(dr, 1e-6);
  return res;
}

SolverState embed_state(const EffectiveChannel& from, const SolverState& st, const P2PSolver& to) {
  const EffectiveChannel& te = to.channel();
  auto rank = [](CausalityMode m) { return m == CausalityMode::StrictlyCausal ? 0 : m == CausalityMode::Causal ? 1 : 2; };
  if (rank(from.mode) > rank(te.mode))
    throw ModeViolation("embed_state: " + to_string(from.mode) + " is not nested in " + to_string(te.mode));
  const std::size_t nst = to.nst(), nz = to.nz(), ny = to.ny(), nsh = to.nshat(), nv = st.nv();
  if (from.spec().sizes != te.spec().sizes) throw ModeViolation("embed_state: channels differ");

  std::map<std::vector<std::size_t>, std::size_t> index;
  for (std::size_t u = 0; u < te.num_strategies(); ++u) index.emplace(te.mapping_table[u], u);
  std::vector<std::size_t> image(from.num_strategies());
  for (std::size_t u = 0; u < image.size(); ++u) {
    auto it = index.find(from.mapping_table[u]);
    if (it == index.end()) throw ModeViolation("embed_state: strategy missing from the target expansion");
    image[u] = it->second;
  }

  SolverState out = to.init_state(st.rho, 0, st.schedule, nv);
  const std::size_t nu = te.num_strategies(), nuf = from.num_strategies();
  auto fill = [](CondDist& c, double v) { std::fill(c.data().begin(), c.data().end(), v); };
  // same floor the solver keeps on its prior rows
  fill(out.p_u, 1e-200);
  for (std::size_t r = 0; r < out.p_u.rows(); ++r) {
    const std::size_t fr = st.p_u.rows() == 1 ? 0 : r;
    for (std::size_t u = 0; u < nuf; ++u) out.p_u(r, image[u]) = st.p_u(fr, u);
  }
  fill(out.p_v, 1.0 / static_cast<double>(nv));
  fill(out.est, 1.0 / static_cast<double>(nsh));
  for (std::size_t u = 0; u < nuf; ++u) {
    const std::size_t w = image[u];
    for (std::size_t t = 0; t < nst; ++t)
      for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t v = 0; v < nv; ++v)
          out.p_v((t * nu + w) * ny + y, v) = st.p_v((t * nuf + u) * ny + y, v);
    for (std::size_t v = 0; v < nv; ++v)
      for (std::size_t z = 0; z < nz; ++z)
        for (std::size_t k = 0; k < nsh; ++k) out.est((w * nv + v) * nz + z, k) = st.est((u * nv + v) * nz + z, k);
  }
  out.rho = st.rho;
  out.iteration = 0;
  to.update_posteriors(out);
  out.L = to.compute_L(out);
  out.B = to.compute_B(out);
  return out;
}

NestedSweep sweep_nested(const ChannelSpec& spec, CausalityMode top, const SweepOptions& opt,
                         std::size_t nc_restarts) {
  NestedSweep ns;
  std::optional<EffectiveChannel> prev_eff;
  std::vector<SolverState> prev;  // by rho index
  for (CausalityMode m : {CausalityMode::StrictlyCausal, CausalityMode::Causal, CausalityMode::NonCausal}) {
    EffectiveChannel eff = expand_shannon_strategy(spec, m);
    P2PSolver solver(eff);
    SweepOptions o = opt;
    if (m == CausalityMode::NonCausal && nc_restarts) o.restarts = nc_restarts;
    o.seeds.clear();
    for (const auto& st : prev) o.seeds.push_back(embed_state(*prev_eff, st, solver));
    SweepResult r = sweep_curve(solver, o);
    prev.assign(opt.rhos.size(), SolverState{});
    for (const auto& p : r.points)
      for (std::size_t i = 0; i < opt.rhos.size(); ++i)
        if (opt.rhos[i] == p.point.rho) prev[i] = p.state;
    prev_eff = std::move(eff);
    ns.modes.push_back(m);
    ns.results.push_back(std::move(r));
    if (m == top) break;
  }
  return ns;
}

}  // namespace cdtrade
