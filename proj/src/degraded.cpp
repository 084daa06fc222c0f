#include "cdtrade/degraded.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cdtrade/simplex.hpp"

namespace cdtrade {

DegradedResult check_degraded(const BCChannelSpec& spec, double tol) {
  const auto& sz = spec.sizes;
  const std::size_t nrow = sz.x * sz.s_t;

  // P12[(x, st)][z1][z2] and P1[(x, st)][z1], averaged with P(s | s_t)
  std::vector<double> p12(nrow * sz.z1 * sz.z2, 0.0), p1(nrow * sz.z1, 0.0);
  for (std::size_t st = 0; st < sz.s_t; ++st) {
    double pst = 0.0;
    for (std::size_t s = 0; s < sz.s; ++s) pst += spec.p_s[s] * spec.p_st_given_s(s, st);
    if (pst <= 0.0) continue;
    for (std::size_t s = 0; s < sz.s; ++s) {
      const double ps = spec.p_s[s] * spec.p_st_given_s(s, st) / pst;
      if (ps == 0.0) continue;
      for (std::size_t x = 0; x < sz.x; ++x) {
        auto row = spec.p_z1z2_given_xs.row(x * sz.s + s);
        const std::size_t r = x * sz.s_t + st;
        for (std::size_t z1 = 0; z1 < sz.z1; ++z1)
          for (std::size_t z2 = 0; z2 < sz.z2; ++z2) {
            const double v = ps * row[z1 * sz.z2 + z2];
            p12[(r * sz.z1 + z1) * sz.z2 + z2] += v;
            p1[r * sz.z1 + z1] += v;
          }
      }
    }
  }

  // The problem separates over z1: min_k sum_r |a_r k - b_r|^2 on the simplex,
  // with a_r = P1(z1 | r) and b_r = P12(z1, . | r). The objective is
  // (sum a^2) |k - k*|^2 + const with k* = sum a b / sum a^2, so the projected
  // minimizer is proj(k*).
  std::vector<double> K(sz.z1 * sz.z2, 1.0 / static_cast<double>(sz.z2));
  for (std::size_t z1 = 0; z1 < sz.z1; ++z1) {
    double aa = 0.0;
    std::vector<double> ab(sz.z2, 0.0);
    for (std::size_t r = 0; r < nrow; ++r) {
      const double a = p1[r * sz.z1 + z1];
      if (a == 0.0) continue;
      aa += a * a;
      for (std::size_t z2 = 0; z2 < sz.z2; ++z2) ab[z2] += a * p12[(r * sz.z1 + z1) * sz.z2 + z2];
    }
    if (aa == 0.0) continue;
    for (double& v : ab) v /= aa;
    project_simplex_in_place(ab);
    std::copy(ab.begin(), ab.end(), K.begin() + z1 * sz.z2);
  }

  double res = 0.0;
  for (std::size_t r = 0; r < nrow; ++r)
    for (std::size_t z1 = 0; z1 < sz.z1; ++z1)
      for (std::size_t z2 = 0; z2 < sz.z2; ++z2)
        res = std::max(res, std::abs(p12[(r * sz.z1 + z1) * sz.z2 + z2] -
                                     p1[r * sz.z1 + z1] * K[z1 * sz.z2 + z2]));

  DegradedResult out;
  out.residual = res;
  out.degraded = res <= tol;
  out.witness = CondDist({"z1"}, {sz.z1}, "z2", sz.z2, std::move(K));
  return out;
}

}  // namespace cdtrade
