#include "doctest.h"

#include <cmath>

#include "cdtrade/builders.hpp"
#include "cdtrade/oracle.hpp"
#include "cdtrade/rng.hpp"
#include "cdtrade/solver_p2p.hpp"

using namespace cdtrade;

namespace {

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
    for (std::size_t j = 0; j < ns; ++j) spec.distortion(i, j) = std::abs(double(i) - double(j));
  spec.validate();
  return spec;
}

}  // namespace

TEST_CASE("BA on channels with closed-form capacity") {
  auto bsc = oracle::ba_capacity({{0.9, 0.1}, {0.1, 0.9}}, 1e-13);
  CHECK(bsc.capacity == doctest::Approx(std::log(2.0) + 0.1 * std::log(0.1) + 0.9 * std::log(0.9)).epsilon(1e-12));
  CHECK(bsc.p_x[0] == doctest::Approx(0.5).epsilon(1e-6));

  // erasure channel: (1 - e) ln 2
  auto bec = oracle::ba_capacity({{0.7, 0.3, 0.0}, {0.0, 0.3, 0.7}}, 1e-13);
  CHECK(bec.capacity == doctest::Approx(0.7 * std::log(2.0)).epsilon(1e-12));

  // noiseless ternary
  auto id = oracle::ba_capacity({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, 1e-13);
  CHECK(id.capacity == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  // useless channel
  CHECK(oracle::ba_capacity({{0.3, 0.7}, {0.3, 0.7}}).capacity == doctest::Approx(0.0));

  // Z channel: closed form ln(1 + (1-p) p^(p/(1-p)))
  const double p = 0.4;
  auto z = oracle::ba_capacity({{1.0, 0.0}, {p, 1 - p}}, 1e-13);
  CHECK(z.capacity == doctest::Approx(std::log(1 + (1 - p) * std::pow(p, p / (1 - p)))).epsilon(1e-10));
}

TEST_CASE("BA bracket contains the capacity and closes") {
  SplitMix64 rng(3);
  for (int t = 0; t < 10; ++t) {
    oracle::Kernel w;
    for (int x = 0; x < 4; ++x) w.push_back(dirichlet1(rng, 3));
    auto r = oracle::ba_capacity(w, 1e-9);
    CHECK(r.lower <= r.capacity);
    CHECK(r.capacity <= r.upper);
    CHECK(r.upper - r.lower <= 1e-9);
  }
}

TEST_CASE("state-conditioned BA") {
  oracle::Kernel a{{0.9, 0.1}, {0.1, 0.9}};
  // same kernel in every state reduces to plain BA
  auto same = oracle::ba_capacity_given_state({a, a}, {0.3, 0.7}, 1e-13);
  CHECK(same.capacity == doctest::Approx(oracle::ba_capacity(a, 1e-13).capacity).epsilon(1e-11));
  // a clean state and a useless one: the clean one carries ln 2 with weight 0.4
  oracle::Kernel clean{{1, 0}, {0, 1}}, dead{{0.5, 0.5}, {0.5, 0.5}};
  auto mix = oracle::ba_capacity_given_state({clean, dead}, {0.4, 0.6}, 1e-13);
  CHECK(mix.capacity == doctest::Approx(0.4 * std::log(2.0)).epsilon(1e-11));
}

TEST_CASE("brute-force estimator") {
  Matrix ham(2, 2);
  ham(0, 1) = ham(1, 0) = 1.0;
  // joint[s][context]
  auto h = oracle::brute_force_estimator({{0.3, 0.1, 0.2}, {0.1, 0.3, 0.2}}, ham);
  CHECK(h == std::vector<std::size_t>{0, 1, 0});  // last context ties, lowest index

  Matrix sq(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) sq(i, j) = (i - j) * (i - j);
  // mass split between the outer states: the middle estimate wins under squared error
  CHECK(oracle::brute_force_estimator({{0.5}, {0.0}, {0.5}}, sq) == std::vector<std::size_t>{1});
}

TEST_CASE("minimum distortion over deterministic inputs") {
  // x = 0 reveals s, x = 1 reveals nothing
  ChannelSpec spec;
  spec.sizes = {2, 1, 2, 2, 2, 1};
  spec.p_s = ProbVec({0.5, 0.5});
  spec.p_st_given_s = CondDist({"s"}, {2}, "s_t", 1, {1.0, 1.0});
  spec.p_z_given_xs = CondDist({"x", "s"}, {2, 2}, "z", 2, {1, 0, 0, 1, 1, 0, 1, 0});
  spec.feedback_map = {0, 0};
  spec.distortion = Matrix(2, 2);
  spec.distortion(0, 1) = spec.distortion(1, 0) = 1.0;
  spec.validate();
  auto md = oracle::min_distortion_deterministic_x(spec);
  CHECK(md.x == 0);
  CHECK(md.value == 0.0);
  CHECK(md.per_x == std::vector<double>{0.0, 0.5});

  auto with_st = small_channel(1, 2, 2, 2, 2);
  CHECK_THROWS(oracle::min_distortion_deterministic_x(with_st));
}

TEST_CASE("monostatic and bistatic radar share the minimum distortion") {
  SimoParams p;
  p.sigma_st.reset();
  p.radar = true;
  p.feedback = true;
  auto mono = oracle::min_distortion_deterministic_x(build_simo_channel(p));
  p.feedback = false;
  auto bi = oracle::min_distortion_deterministic_x(build_simo_channel(p));
  CHECK(std::abs(mono.value - bi.value) <= 1e-9);
  CHECK(mono.x == bi.x);
}

TEST_CASE("lagrangian matches the solver objective at exact posteriors") {
  for (std::uint64_t seed : {2u, 3u, 4u})
    for (auto mode : {CausalityMode::StrictlyCausal, CausalityMode::Causal, CausalityMode::NonCausal}) {
      auto spec = small_channel(seed, 3, 2, 2, 3);
      auto eff = expand_shannon_strategy(spec, mode);
      P2PSolver solver(eff);
      auto st = solver.init_state(0.8, seed, {});
      for (int i = 0; i < 3; ++i) solver.iterate(st);
      CHECK(oracle::lagrangian(eff, st) == doctest::Approx(solver.compute_L(st)).epsilon(1e-11));
    }
}

TEST_CASE("analytic gradient agrees with finite differences") {
  auto spec = small_channel(5, 3, 2, 2, 3);
  for (auto mode : {CausalityMode::Causal, CausalityMode::NonCausal}) {
    auto eff = expand_shannon_strategy(spec, mode);
    P2PSolver solver(eff);
    auto st = solver.init_state(0.5, 9, {});
    solver.iterate(st);
    auto cert = oracle::stationarity_certificate(eff, st, 1e-6, 200);
    CHECK(cert.fd_checked > 20);
    CHECK(cert.fd_max_rel_error <= 1e-4);
  }
}

TEST_CASE("certificate separates converged from arbitrary states") {
  auto spec = small_channel(6, 3, 2, 2, 3);
  auto eff = expand_shannon_strategy(spec, CausalityMode::NonCausal);
  P2PSolver solver(eff);
  SolveOptions o;
  o.rho = 0.6;
  o.delta = 1e-12;
  auto r = solver.solve(o);
  REQUIRE((r.point.flags & kMaxIters) == 0);
  auto good = oracle::stationarity_certificate(eff, r.state);
  CHECK(good.residual <= 1e-6);
  CHECK(good.blocks.size() == 5);

  auto start = solver.init_state(0.6, 1, {});
  auto bad = oracle::stationarity_certificate(eff, start);
  CHECK(bad.residual > 1e-3);
}

TEST_CASE("joint over contexts is a distribution") {
  auto spec = small_channel(7, 3, 2, 2, 3);
  auto eff = expand_shannon_strategy(spec, CausalityMode::Causal);
  P2PSolver solver(eff);
  auto st = solver.init_state(0.1, 2, {});
  auto j = oracle::joint_s_given_context(eff, st);
  REQUIRE(j.size() == 3);
  double total = 0;
  for (const auto& row : j)
    for (double v : row) {
      CHECK(v >= 0.0);
      total += v;
    }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exhaustive search guards its size") {
  auto spec = small_channel(8, 2, 1, 2, 2);
  auto eff = expand_shannon_strategy(spec, CausalityMode::Causal);
  auto g = oracle::exhaustive_small_solver(eff, 0.0, 50, 1);
  CHECK(g.points == 51);
  // binary-input channel at rho = 0: the grid best approaches capacity from below
  oracle::Kernel k(2, std::vector<double>(2, 0.0));
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t z = 0; z < 2; ++z) k[x][z] += spec.p_s[s] * spec.p_z_given_xs(x * 2 + s, z);
  const double cap = oracle::ba_capacity(k, 1e-13).capacity;
  CHECK(g.best_L <= cap + 1e-12);
  CHECK(g.best_L >= cap - 1e-3);

  auto big = small_channel(9, 2, 2, 3, 4);
  auto e2 = expand_shannon_strategy(big, CausalityMode::NonCausal);
  CHECK_THROWS_AS(oracle::exhaustive_small_solver(e2, 0.0, 10, 2), TooLarge);
}
