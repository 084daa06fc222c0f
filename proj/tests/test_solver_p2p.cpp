#include "doctest.h"

#include <cmath>

#include "cdtrade/builders.hpp"
#include "cdtrade/curve.hpp"
#include "cdtrade/oracle.hpp"
#include "cdtrade/rng.hpp"
#include "cdtrade/solver_p2p.hpp"

using namespace cdtrade;

namespace {

const CausalityMode kModes[] = {CausalityMode::StrictlyCausal, CausalityMode::Causal,
                                CausalityMode::NonCausal};

// Small random channel with identity feedback and Hamming-like distortion.
ChannelSpec small_channel(std::uint64_t seed, std::size_t ns, std::size_t nst, std::size_t nx,
                          std::size_t nz) {
  SplitMix64 rng(seed);
  ChannelSpec spec;
  spec.sizes = {ns, nst, nx, nz, ns, nz};
  spec.p_s = ProbVec(dirichlet1(rng, ns));
  std::vector<double> pst, pz;
  for (std::size_t s = 0; s < ns; ++s) {
    auto r = dirichlet1(rng, nst);
    pst.insert(pst.end(), r.begin(), r.end());
  }
  for (std::size_t i = 0; i < nx * ns; ++i) {
    auto r = dirichlet1(rng, nz);
    pz.insert(pz.end(), r.begin(), r.end());
  }
  spec.p_st_given_s = CondDist({"s"}, {ns}, "s_t", nst, pst);
  spec.p_z_given_xs = CondDist({"x", "s"}, {nx, ns}, "z", nz, pz);
  for (std::size_t z = 0; z < nz; ++z) spec.feedback_map.push_back(z);
  spec.distortion = Matrix(ns, ns);
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = 0; j < ns; ++j) spec.distortion(i, j) = i == j ? 0.0 : 1.0 + 0.5 * (i + j);
  spec.validate();
  return spec;
}

double bsc_capacity(double p) { return std::log(2.0) + p * std::log(p) + (1 - p) * std::log(1 - p); }

}  // namespace

TEST_CASE("BSC at rho = 0 reaches capacity in every mode") {
  for (double p : {0.1, 0.25}) {
    auto spec = build_bsc(p);
    for (auto mode : kModes) {
      P2PSolver solver(expand_shannon_strategy(spec, mode));
      SolveOptions o;
      o.delta = 1e-12;
      auto r = solver.solve(o);
      CHECK(r.point.flags == kNoFlags);
      CHECK(r.point.rate == doctest::Approx(bsc_capacity(p)).epsilon(1e-10));
      CHECK(r.point.distortion == 0.0);
    }
  }
}

TEST_CASE("rate at rho = 0 without side information matches the averaged-kernel capacity") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    auto spec = small_channel(seed, 3, 1, 3, 4);
    // P(z | x) = sum_s P(s) W(z | x, s)
    oracle::Kernel k(3, std::vector<double>(4, 0.0));
    for (std::size_t x = 0; x < 3; ++x)
      for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t z = 0; z < 4; ++z) k[x][z] += spec.p_s[s] * spec.p_z_given_xs(x * 3 + s, z);
    const double cap = oracle::ba_capacity(k, 1e-12).capacity;
    P2PSolver solver(expand_shannon_strategy(spec, CausalityMode::Causal));
    SweepOptions so;
    so.rhos = {0.0};
    so.base.delta = 1e-11;
    so.restarts = 3;
    auto sw = sweep_curve(solver, so);
    CHECK(sw.points[0].point.rate == doctest::Approx(cap).epsilon(1e-8));
  }
}

TEST_CASE("bound and ascent hold along every trace") {
  for (std::uint64_t seed : {21u, 22u, 23u})
    for (auto mode : kModes)
      for (double rho : {0.0, 0.3, 4.0}) {
        auto spec = small_channel(seed, 3, 2, 2, 3);
        P2PSolver solver(expand_shannon_strategy(spec, mode));
        SolveOptions o;
        o.rho = rho;
        o.seed = seed;
        o.delta = 1e-7;
        auto r = solver.solve(o);
        auto tc = check_trace(r.trace);
        CAPTURE(seed);
        CAPTURE(rho);
        CHECK(tc.bound_violations == 0);
        CHECK(tc.ascent_violations == 0);
        CHECK(r.trace.size() == r.point.iterations);
        CHECK(r.point.B >= r.point.L - 1e-9);
        if (!(r.point.flags & kMaxIters)) CHECK(r.point.gap <= o.delta + 1e-12);
        CHECK(r.point.L == doctest::Approx(r.point.rate - rho * r.point.distortion).epsilon(1e-9));
      }
}

TEST_CASE("converged estimator is posterior-optimal") {
  auto spec = small_channel(31, 4, 2, 2, 3);
  for (auto mode : kModes) {
    auto eff = expand_shannon_strategy(spec, mode);
    P2PSolver solver(eff);
    SolveOptions o;
    o.rho = 0.7;
    o.delta = 1e-10;
    auto r = solver.solve(o);
    auto joint = oracle::joint_s_given_context(eff, r.state);
    auto best = oracle::brute_force_estimator(joint, spec.distortion);
    const std::size_t nctx = joint[0].size();
    for (std::size_t c = 0; c < nctx; ++c) {
      double mass = 0, chosen = 0, opt = 0;
      for (std::size_t s = 0; s < joint.size(); ++s) {
        mass += joint[s][c];
        for (std::size_t sh = 0; sh < spec.sizes.s_hat; ++sh)
          chosen += joint[s][c] * r.state.est(c, sh) * spec.distortion(s, sh);
        opt += joint[s][c] * spec.distortion(s, best[c]);
      }
      if (mass > 1e-12) CHECK(chosen <= opt + 1e-9);
    }
  }
}

TEST_CASE("solver agrees with exhaustive search on a tiny instance") {
  auto spec = small_channel(41, 2, 1, 3, 3);
  auto eff = expand_shannon_strategy(spec, CausalityMode::StrictlyCausal);
  P2PSolver solver(eff);
  for (double rho : {0.0, 0.2, 1.0}) {
    auto grid = oracle::exhaustive_small_solver(eff, rho, 120, 1);
    SweepOptions so;
    so.rhos = {rho};
    so.base.delta = 1e-10;
    so.base.v_size = 1;
    so.restarts = 4;
    auto sw = sweep_curve(solver, so);
    const double L = sw.points[0].point.L;
    CAPTURE(rho);
    CHECK(L >= grid.best_L - 1e-9);
    CHECK(L - grid.best_L < 1e-3);
  }
}

TEST_CASE("large rho drives distortion to the best deterministic input") {
  for (std::uint64_t seed : {51u, 52u}) {
    auto spec = small_channel(seed, 3, 1, 3, 3);
    auto md = oracle::min_distortion_deterministic_x(spec);
    P2PSolver solver(expand_shannon_strategy(spec, CausalityMode::Causal));
    SweepOptions so;
    so.rhos = {10.0, 100.0, 1e4};
    so.base.delta = 1e-9;
    so.restarts = 3;
    auto sw = sweep_curve(solver, so);
    for (const auto& p : sw.points)
      if (p.point.rho == 1e4) CHECK(p.point.distortion == doctest::Approx(md.value).epsilon(1e-6));
    CHECK(sw.points.front().point.distortion == doctest::Approx(md.value).epsilon(1e-6));
  }
}

TEST_CASE("mode ordering on a small channel") {
  auto spec = small_channel(61, 3, 2, 2, 3);
  const double rhos[] = {0.0, 0.5, 2.0};
  std::vector<std::vector<double>> L;
  for (auto mode : kModes) {
    P2PSolver solver(expand_shannon_strategy(spec, mode));
    SweepOptions so;
    so.rhos.assign(std::begin(rhos), std::end(rhos));
    so.base.delta = 1e-9;
    so.restarts = 6;
    auto sw = sweep_curve(solver, so);
    std::vector<double> by_rho(3);
    for (const auto& p : sw.points)
      for (int i = 0; i < 3; ++i)
        if (p.point.rho == rhos[i]) by_rho[i] = p.point.L;
    L.push_back(by_rho);
  }
  for (int i = 0; i < 3; ++i) {
    CHECK(L[0][i] <= L[1][i] + 1e-7);
    CHECK(L[1][i] <= L[2][i] + 1e-7);
  }
}

TEST_CASE("sweep over a small channel gives a monotone concave curve") {
  auto spec = small_channel(71, 3, 2, 2, 3);
  P2PSolver solver(expand_shannon_strategy(spec, CausalityMode::NonCausal));
  SweepOptions so;
  so.rhos = log_grid(1e-2, 1e2, 9);
  so.rhos.insert(so.rhos.begin(), 0.0);
  so.base.delta = 1e-9;
  so.restarts = 4;
  auto sw = sweep_curve(solver, so);
  CHECK(sw.shape.ok());
  for (const auto& p : sw.points) CHECK(p.trace.ok());
  for (std::size_t i = 1; i < sw.points.size(); ++i)
    CHECK(sw.points[i].point.distortion >= sw.points[i - 1].point.distortion);
}

TEST_CASE("solves are reproducible and warm starts at a fixed point stay put") {
  auto spec = small_channel(81, 3, 2, 2, 3);
  P2PSolver solver(expand_shannon_strategy(spec, CausalityMode::NonCausal));
  SolveOptions o;
  o.rho = 0.4;
  o.seed = 5;
  o.delta = 1e-10;
  auto a = solver.solve(o);
  auto b = solver.solve(o);
  CHECK(a.state.p_u == b.state.p_u);
  CHECK(a.state.est == b.state.est);
  CHECK(a.point.L == b.point.L);

  auto w = solver.solve(o, a.state);
  CHECK(w.point.L >= a.point.L - 1e-12);
  CHECK(w.point.iterations <= 2);

  // a neighbour's state is a valid start at another rho
  SolveOptions o2 = o;
  o2.rho = 0.5;
  auto n = solver.solve(o2, a.state);
  CHECK(n.state.rho == 0.5);
  CHECK(check_trace(n.trace).ok());
}

TEST_CASE("larger v alphabet never lowers the objective") {
  auto spec = small_channel(91, 3, 2, 2, 3);
  P2PSolver solver(expand_shannon_strategy(spec, CausalityMode::Causal));
  SweepOptions so;
  so.rhos = {0.5};
  so.base.delta = 1e-9;
  so.restarts = 4;
  so.base.v_size = 1;
  const double l1 = sweep_curve(solver, so).points[0].point.L;
  so.base.v_size = 3;
  const double l3 = sweep_curve(solver, so).points[0].point.L;
  CHECK(l3 >= l1 - 1e-7);
}

TEST_CASE("embedding a nested-mode solution keeps its objective") {
  auto spec = small_channel(101, 3, 2, 2, 3);
  auto sc = expand_shannon_strategy(spec, CausalityMode::StrictlyCausal);
  auto c = expand_shannon_strategy(spec, CausalityMode::Causal);
  auto nc = expand_shannon_strategy(spec, CausalityMode::NonCausal);
  P2PSolver ssc(sc), sc_(c), snc(nc);
  SolveOptions o;
  o.rho = 0.6;
  o.delta = 1e-9;
  auto r = ssc.solve(o);
  auto in_c = embed_state(sc, r.state, sc_);
  CHECK(in_c.L == doctest::Approx(r.state.L).epsilon(1e-12));
  CHECK(oracle::lagrangian(c, in_c) == doctest::Approx(r.state.L).epsilon(1e-12));
  auto rc = sc_.solve(o, in_c);
  CHECK(rc.point.L >= r.point.L - 1e-12);
  auto in_nc = embed_state(c, rc.state, snc);
  CHECK(in_nc.L == doctest::Approx(rc.state.L).epsilon(1e-12));
  CHECK(in_nc.p_u.rows() == 2);
  CHECK_THROWS_AS(embed_state(nc, in_nc, ssc), ModeViolation);
}

TEST_CASE("nested sweep orders the objective across modes") {
  auto spec = small_channel(111, 3, 2, 2, 3);
  SweepOptions so;
  so.rhos = {0.0, 0.3, 3.0};
  so.base.delta = 1e-9;
  so.restarts = 1;
  auto ns = sweep_nested(spec, CausalityMode::NonCausal, so);
  REQUIRE(ns.results.size() == 3);
  for (double rho : so.rhos) {
    std::vector<double> L;
    for (const auto& r : ns.results)
      for (const auto& p : r.points)
        if (p.point.rho == rho) L.push_back(p.point.L);
    REQUIRE(L.size() == 3);
    CHECK(L[0] <= L[1] + 1e-12);
    CHECK(L[1] <= L[2] + 1e-12);
  }
}
