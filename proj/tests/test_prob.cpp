#include "doctest.h"

#include <cmath>
#include <vector>

#include "cdtrade/errors.hpp"
#include "cdtrade/prob.hpp"
#include "cdtrade/rng.hpp"
#include "cdtrade/simplex.hpp"

using namespace cdtrade;

namespace {

// plain double-loop reference for I(A;B) on a 2-axis table
double mi_direct(const std::vector<std::vector<double>>& p) {
  const std::size_t na = p.size(), nb = p[0].size();
  std::vector<double> pa(na, 0.0), pb(nb, 0.0);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      pa[i] += p[i][j];
      pb[j] += p[i][j];
    }
  double s = 0.0;
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j)
      if (p[i][j] > 0) s += p[i][j] * std::log(p[i][j] / (pa[i] * pb[j]));
  return s;
}

// sum p(a,b,c) log p(a,b|c) / (p(a|c) p(b|c)) straight from the definition
double cmi_direct(const std::vector<double>& v, std::size_t na, std::size_t nb, std::size_t nc) {
  auto P = [&](std::size_t a, std::size_t b, std::size_t c) { return v[(a * nb + b) * nc + c]; };
  double s = 0.0;
  for (std::size_t c = 0; c < nc; ++c) {
    double pc = 0.0;
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t b = 0; b < nb; ++b) pc += P(a, b, c);
    if (pc <= 0) continue;
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t b = 0; b < nb; ++b) {
        const double pabc = P(a, b, c);
        if (pabc <= 0) continue;
        double pac = 0.0, pbc = 0.0;
        for (std::size_t x = 0; x < nb; ++x) pac += P(a, x, c);
        for (std::size_t x = 0; x < na; ++x) pbc += P(x, b, c);
        s += pabc * std::log((pabc / pc) / ((pac / pc) * (pbc / pc)));
      }
  }
  return s;
}

std::vector<double> random_joint(SplitMix64& rng, std::size_t n) { return dirichlet1(rng, n); }

JointTensor table(const std::vector<std::vector<double>>& p) {
  std::vector<double> flat;
  for (const auto& r : p) flat.insert(flat.end(), r.begin(), r.end());
  return JointTensor({"a", "b"}, {p.size(), p[0].size()}, flat);
}

}  // namespace

TEST_CASE("normalize examples") {
  auto a = normalize(std::vector<double>{2, 2});
  CHECK(a.vec[0] == 0.5);
  CHECK(a.vec[1] == 0.5);
  CHECK_FALSE(a.degenerate);

  auto b = normalize(std::vector<double>{1, 0, 0});
  CHECK(b.vec.values() == std::vector<double>{1, 0, 0});

  auto c = normalize(std::vector<double>{0, 0});
  CHECK(c.vec[0] == 0.5);
  CHECK(c.vec[1] == 0.5);
  CHECK(c.degenerate);

  // below the underflow floor counts as zero mass
  auto d = normalize(std::vector<double>{1e-320, 0});
  CHECK(d.degenerate);

  CHECK_THROWS_AS(normalize(std::vector<double>{}), ValidationError);
  CHECK_THROWS_AS(normalize(std::vector<double>{-1, 2}), ValidationError);
}

TEST_CASE("normalize is idempotent") {
  SplitMix64 rng(11);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(1 + t % 9);
    for (auto& x : v) x = rng.uniform() * std::pow(10.0, 6 * rng.uniform() - 3);
    auto once = normalize(v);
    auto twice = normalize(once.vec.values());
    CHECK(once.vec.values() == twice.vec.values());
    double s = 0;
    for (double x : once.vec) s += x;
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("ProbVec rejects bad input") {
  CHECK_THROWS_AS(ProbVec({0.5, 0.6}), ValidationError);
  CHECK_THROWS_AS(ProbVec({1.5, -0.5}), ValidationError);
  CHECK_NOTHROW(ProbVec({0.25, 0.75}));
}

TEST_CASE("mutual information examples") {
  SUBCASE("noiseless binary channel") {
    CHECK(mutual_information(table({{0.5, 0}, {0, 0.5}}), {"a"}, {"b"}) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  }
  SUBCASE("product distribution") {
    std::vector<double> pa{0.2, 0.3, 0.5}, pb{0.6, 0.4};
    std::vector<std::vector<double>> p(3, std::vector<double>(2));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 2; ++j) p[i][j] = pa[i] * pb[j];
    CHECK(std::abs(mutual_information(table(p), {"a"}, {"b"})) <= 1e-15);
  }
  SUBCASE("fixed 3x3 joint") {
    std::vector<std::vector<double>> p{{0.10, 0.05, 0.05}, {0.02, 0.30, 0.08}, {0.10, 0.10, 0.20}};
    // frozen from the double-loop reference
    CHECK(mi_direct(p) == doctest::Approx(0.15948846786338652).epsilon(1e-14));
    CHECK(mutual_information(table(p), {"a"}, {"b"}) == doctest::Approx(0.15948846786338652).epsilon(1e-12));
  }
}

TEST_CASE("mutual information properties on random joints") {
  SplitMix64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const std::size_t na = 1 + t % 4, nb = 1 + (t / 4) % 5;
    auto v = random_joint(rng, na * nb);
    if (t % 3 == 0) v[0] = 0.0;  // zero cells
    double s = 0;
    for (double x : v) s += x;
    for (double& x : v) x /= s;
    JointTensor j({"a", "b"}, {na, nb}, v);
    std::vector<std::vector<double>> p(na, std::vector<double>(nb));
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t b = 0; b < nb; ++b) p[a][b] = v[a * nb + b];
    const double mi = mutual_information(j, {"a"}, {"b"});
    CHECK(mi >= -1e-12);
    CHECK(mi <= std::min(entropy(j, {"a"}), entropy(j, {"b"})) + 1e-10);
    CHECK(mi == doctest::Approx(mi_direct(p)).epsilon(1e-10));
  }
}

TEST_CASE("conditional mutual information examples") {
  SUBCASE("irrelevant conditioning") {
    std::vector<double> pab{0.1, 0.2, 0.3, 0.4}, pc{0.25, 0.75};
    std::vector<double> v;
    for (double x : pab)
      for (double c : pc) v.push_back(x * c);
    JointTensor j({"a", "b", "c"}, {2, 2, 2}, v);
    JointTensor j2({"a", "b"}, {2, 2}, pab);
    CHECK(conditional_mutual_information(j, {"a"}, {"b"}, {"c"}) ==
          doctest::Approx(mutual_information(j2, {"a"}, {"b"})).epsilon(1e-12));
  }
  SUBCASE("A = B = C") {
    std::vector<double> v(27, 0.0);
    const double w[3] = {0.2, 0.5, 0.3};
    for (int i = 0; i < 3; ++i) v[(i * 3 + i) * 3 + i] = w[i];
    JointTensor j({"a", "b", "c"}, {3, 3, 3}, v);
    CHECK(std::abs(conditional_mutual_information(j, {"a"}, {"b"}, {"c"})) <= 1e-15);
  }
  SUBCASE("fixed 2x2x2 joint") {
    std::vector<double> v{0.05, 0.12, 0.08, 0.20, 0.15, 0.10, 0.22, 0.08};
    CHECK(cmi_direct(v, 2, 2, 2) == doctest::Approx(0.0076984583446322551).epsilon(1e-13));
    JointTensor j({"a", "b", "c"}, {2, 2, 2}, v);
    CHECK(conditional_mutual_information(j, {"a"}, {"b"}, {"c"}) ==
          doctest::Approx(0.0076984583446322551).epsilon(1e-10));
  }
}

TEST_CASE("chain-rule CMI matches the definition on random tensors") {
  SplitMix64 rng(5);
  for (int t = 0; t < 60; ++t) {
    const std::size_t na = 1 + t % 4, nb = 1 + (t / 4) % 4, nc = 1 + (t / 16) % 4;
    if (na * nb * nc > 256) continue;
    auto v = random_joint(rng, na * nb * nc);
    JointTensor j({"a", "b", "c"}, {na, nb, nc}, v);
    const double got = conditional_mutual_information(j, {"a"}, {"b"}, {"c"});
    CHECK(std::abs(got - cmi_direct(v, na, nb, nc)) <= 1e-10);
    CHECK(got >= -1e-12);
  }
}

TEST_CASE("expected distortion examples") {
  Matrix ham(2, 2);
  ham(0, 1) = ham(1, 0) = 1.0;
  CHECK(expected_distortion(JointTensor({"s", "sh"}, {2, 2}, {0.5, 0, 0, 0.5}), ham) == 0.0);
  CHECK(expected_distortion(JointTensor({"s", "sh"}, {2, 2}, {0.25, 0.25, 0.25, 0.25}), ham) == 0.5);

  const double g[4] = {-67.5, -22.5, 22.5, 67.5};
  Matrix sq(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) sq(i, k) = (g[i] - g[k]) * (g[i] - g[k]);
  std::vector<double> J{0.2, 0.05, 0, 0, 0.05, 0.2, 0.05, 0, 0, 0.05, 0.15, 0.05, 0, 0, 0.05, 0.15};
  // six neighbouring cells of mass 0.05, each at 45 deg: 0.3 * 2025
  CHECK(expected_distortion(JointTensor({"s", "sh"}, {4, 4}, J), sq) == doctest::Approx(607.5).epsilon(1e-14));
}

TEST_CASE("joint from factors reproduces its factors") {
  SplitMix64 rng(9);
  for (int t = 0; t < 20; ++t) {
    const std::size_t ns = 2 + t % 3, nx = 2 + t % 2, nz = 3;
    auto ps = dirichlet1(rng, ns);
    std::vector<double> px_s, pz_xs;
    for (std::size_t s = 0; s < ns; ++s) {
      auto r = dirichlet1(rng, nx);
      px_s.insert(px_s.end(), r.begin(), r.end());
    }
    for (std::size_t i = 0; i < nx * ns; ++i) {
      auto r = dirichlet1(rng, nz);
      pz_xs.insert(pz_xs.end(), r.begin(), r.end());
    }
    // factor axes are in the listed order; pz is stored cond (x, s)
    JointTensor j = JointTensor::from_factors({"s", "x", "z"}, {ns, nx, nz},
                                              {{{"s"}, ps}, {{"s", "x"}, px_s}, {{"x", "s", "z"}, pz_xs}});
    CHECK(j.total() == doctest::Approx(1.0).epsilon(1e-12));
    CondDist cx = j.conditional({"x"}, {"s"});
    CondDist cz = j.conditional({"z"}, {"x", "s"});
    for (std::size_t i = 0; i < px_s.size(); ++i) CHECK(std::abs(cx.data()[i] - px_s[i]) <= 1e-10);
    for (std::size_t i = 0; i < pz_xs.size(); ++i) CHECK(std::abs(cz.data()[i] - pz_xs[i]) <= 1e-10);
    auto m = j.marginal({"s"});
    for (std::size_t s = 0; s < ns; ++s) CHECK(std::abs(m.values()[s] - ps[s]) <= 1e-12);
  }
}

TEST_CASE("conditional on a zero-mass parent is uniform") {
  JointTensor j({"a", "b"}, {2, 3}, {0.5, 0.25, 0.25, 0, 0, 0});
  CondDist c = j.conditional({"b"}, {"a"});
  for (std::size_t k = 0; k < 3; ++k) CHECK(c(1, k) == doctest::Approx(1.0 / 3));
}

TEST_CASE("tensor size guard") {
  CHECK_THROWS_AS(check_tensor_size(1e30, "huge"), TooLarge);
  CHECK_NOTHROW(check_tensor_size(10, "small"));
}

TEST_CASE("project_simplex examples") {
  auto a = project_simplex(std::vector<double>{0.3, 0.7});
  CHECK(a[0] == doctest::Approx(0.3));
  CHECK(a[1] == doctest::Approx(0.7));
  auto b = project_simplex(std::vector<double>{2, 0});
  CHECK(b[0] == 1.0);
  CHECK(b[1] == 0.0);
  auto c = project_simplex(std::vector<double>{0.6, 0.9});
  CHECK(c[0] == doctest::Approx(0.35).epsilon(1e-15));
  CHECK(c[1] == doctest::Approx(0.65).epsilon(1e-15));
  auto d = project_simplex(std::vector<double>{-0.5, 0.5});
  CHECK(d[0] == 0.0);
  CHECK(d[1] == 1.0);
}

TEST_CASE("project_simplex satisfies the projection KKT conditions") {
  SplitMix64 rng(21);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> y(1 + t % 7);
    for (auto& v : y) v = 4 * rng.uniform() - 2;
    auto p = project_simplex(y);
    double s = 0;
    for (double v : p) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    // p = max(y - tau, 0): every positive entry shares one shift, zero entries sit below it
    double tau = 0;
    bool have = false;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (p[i] > 0) {
        if (!have) tau = y[i] - p[i], have = true;
        CHECK(y[i] - p[i] == doctest::Approx(tau).epsilon(1e-12));
      }
    for (std::size_t i = 0; i < y.size(); ++i)
      if (p[i] == 0) CHECK(y[i] <= tau + 1e-12);
  }
}

TEST_CASE("proximal estimator step examples") {
  ProximalSchedule constant{ProximalSchedule::Kind::Constant, 1.0};
  SUBCASE("hand KKT on the 2-simplex") {
    // T = t0 * range(a) = 1
    std::vector<double> row{0.5, 0.5}, a{1, 0};
    CHECK(proximal_min_step(row, a, constant, 0));
    CHECK(row[0] == 0.0);
    CHECK(row[1] == 1.0);
  }
  SUBCASE("skip when already at the argmin") {
    std::vector<double> row{0, 1, 0}, a{3, 1, 2};
    CHECK_FALSE(proximal_min_step(row, a, constant, 0));
    CHECK(row == std::vector<double>{0, 1, 0});
  }
  SUBCASE("huge T leaves the row in place") {
    ProximalSchedule big{ProximalSchedule::Kind::Constant, 1e15};
    std::vector<double> row{0.4, 0.6}, a{0, 1};
    proximal_min_step(row, a, big, 0);
    CHECK(row[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(row[1] == doctest::Approx(0.6).epsilon(1e-12));
  }
}
