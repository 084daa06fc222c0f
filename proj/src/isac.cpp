#include "cdtrade/isac.hpp"

#include <algorithm>
#include <cmath>

#include "cdtrade/errors.hpp"
#include "cdtrade/rng.hpp"

namespace cdtrade {

namespace {

constexpr double kProbFloor = 1e-200;

void check_radar(const BCChannelSpec& spec) {
  const auto& sz = spec.sizes;
  if (sz.s_t != 1) throw ModeViolation("isac: transmitter side information must be absent (|S_T| = 1)");
  for (std::size_t z1 = 0; z1 < sz.z1; ++z1) {
    std::size_t owner = sz.x;
    for (std::size_t x = 0; x < sz.x; ++x) {
      bool hit = false;
      for (std::size_t s = 0; s < sz.s && !hit; ++s) {
        auto row = spec.p_z1z2_given_xs.row(x * sz.s + s);
        for (std::size_t z2 = 0; z2 < sz.z2 && !hit; ++z2) hit = row[z1 * sz.z2 + z2] > 0.0;
      }
      if (!hit) continue;
      if (owner != sz.x)
        throw ModeViolation("isac: receiver-1 output " + std::to_string(z1) +
                            " is reachable from two inputs; Z1 must contain X");
      owner = x;
    }
  }
}

}  // namespace

IsacSolution solve_isac(const BCChannelSpec& spec, double rho, const IsacOptions& opt) {
  if (!(rho >= 0.0)) throw ConfigError("rho must be >= 0");
  if (!(opt.delta > 0.0)) throw ConfigError("delta must be > 0");
  check_radar(spec);
  const auto& sz = spec.sizes;
  const std::size_t nx = sz.x, nz1 = sz.z1, nz2 = sz.z2, ns = sz.s, nsh = sz.s_hat;

  std::vector<double> w2(nx * nz2, 0.0), dm(nx * nz1 * nsh, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t s = 0; s < ns; ++s) {
      auto row = spec.p_z1z2_given_xs.row(x * ns + s);
      for (std::size_t z1 = 0; z1 < nz1; ++z1) {
        double p1 = 0.0;
        for (std::size_t z2 = 0; z2 < nz2; ++z2) {
          const double v = spec.p_s[s] * row[z1 * nz2 + z2];
          p1 += v;
          w2[x * nz2 + z2] += v;
        }
        if (p1 == 0.0) continue;
        for (std::size_t k = 0; k < nsh; ++k) dm[(x * nz1 + z1) * nsh + k] += p1 * spec.distortion(s, k);
      }
    }

  SplitMix64 rng(opt.seed);
  std::vector<double> p = dirichlet1(rng, nx);
  for (double& v : p) v = std::max(v, kProbFloor);
  std::vector<double> est(nx * nz1 * nsh);
  for (std::size_t r = 0; r < nx * nz1; ++r) {
    auto d = dirichlet1(rng, nsh);
    std::copy(d.begin(), d.end(), est.begin() + r * nsh);
  }
  std::vector<double> lq(nz2 * nx), E(nx), K(nx), a(nsh);

  auto posterior = [&] {
    for (std::size_t z2 = 0; z2 < nz2; ++z2) {
      double s = 0.0;
      for (std::size_t x = 0; x < nx; ++x) s += p[x] * w2[x * nz2 + z2];
      for (std::size_t x = 0; x < nx; ++x)
        lq[z2 * nx + x] = s > kUnderflowFloor ? std::log(std::max(p[x] * w2[x * nz2 + z2] / s, kUnderflowFloor))
                                              : -std::log(static_cast<double>(nx));
    }
  };
  // gain[x] = sum_z2 W2 log q - rho E_x
  auto gains = [&] {
    for (std::size_t x = 0; x < nx; ++x) {
      double e = 0.0;
      for (std::size_t i = 0; i < nz1 * nsh; ++i) e += est[x * nz1 * nsh + i] * dm[x * nz1 * nsh + i];
      E[x] = e;
      double g = -rho * e;
      for (std::size_t z2 = 0; z2 < nz2; ++z2)
        if (w2[x * nz2 + z2] > 0.0) g += w2[x * nz2 + z2] * lq[z2 * nx + x];
      K[x] = g;
    }
  };

  IsacSolution out;
  CDPoint& pt = out.point;
  pt.rho = rho;
  pt.mode = CausalityMode::NonCausal;
  std::size_t it = 0;
  bool converged = false;
  posterior();
  gains();
  while (it < opt.max_iters) {
    ++it;
    std::vector<double> logits = K;
    softmax_in_place(logits);
    for (std::size_t x = 0; x < nx; ++x) p[x] = std::max(logits[x], kProbFloor);

    std::size_t moved = 0;
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t z1 = 0; z1 < nz1; ++z1) {
        const double* d = &dm[(x * nz1 + z1) * nsh];
        for (std::size_t k = 0; k < nsh; ++k) a[k] = p[x] * d[k];
        if (proximal_min_step({est.data() + (x * nz1 + z1) * nsh, nsh}, a, opt.schedule, it - 1)) ++moved;
      }

    posterior();
    gains();
    double L = 0.0, B = -INFINITY;
    for (std::size_t x = 0; x < nx; ++x) {
      const double k = K[x] - std::log(p[x]);
      L += p[x] * k;
      B = std::max(B, k);
    }
    pt.L = L;
    pt.B = B;
    out.trace.emplace_back(L, B);
    if (B - L <= opt.delta && moved == 0) {
      converged = true;
      break;
    }
  }

  double rate = 0.0, D = 0.0;
  for (std::size_t z2 = 0; z2 < nz2; ++z2) {
    double pz = 0.0;
    for (std::size_t x = 0; x < nx; ++x) pz += p[x] * w2[x * nz2 + z2];
    for (std::size_t x = 0; x < nx; ++x) {
      const double j = p[x] * w2[x * nz2 + z2];
      if (j > kUnderflowFloor && pz > kUnderflowFloor) rate += j * std::log(w2[x * nz2 + z2] / pz);
    }
  }
  for (std::size_t x = 0; x < nx; ++x) D += p[x] * E[x];
  pt.rate = rate;
  pt.distortion = D;
  pt.iterations = it;
  pt.gap = pt.B - pt.L;
  if (!converged) pt.flags |= kMaxIters;
  out.p_x = p;
  return out;
}

std::vector<CDPoint> solve_isac_tradeoff(const BCChannelSpec& spec, const std::vector<double>& rhos,
                                         double delta, std::uint64_t seed) {
  if (rhos.empty()) throw ConfigError("rho grid is empty");
  std::vector<CDPoint> out;
  for (std::size_t i = 0; i < rhos.size(); ++i) {
    IsacOptions o;
    o.delta = delta;
    o.seed = derive_seed(seed, i);
    out.push_back(solve_isac(spec, rhos[i], o).point);
  }
  return out;
}

}  // namespace cdtrade
