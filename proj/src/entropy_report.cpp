#include "cdtrade/entropy_report.hpp"

#include <cmath>

namespace cdtrade {

double entropy_nats(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) h -= xlogx(v);
  return h;
}

EntropyReport entropy_report(const P2PSolver& solver, const SolverState& state) {
  const auto& eff = solver.channel();
  const auto& spec = eff.spec();
  const std::size_t nst = spec.sizes.s_t, nx = spec.sizes.x, nu = state.nu();
  const bool per_st = state.p_u.rows() == nst && nst > 1;

  std::vector<double> pst(nst, 0.0);
  for (std::size_t s = 0; s < spec.sizes.s; ++s)
    for (std::size_t t = 0; t < nst; ++t) pst[t] += spec.p_s[s] * spec.p_st_given_s(s, t);

  EntropyReport r;
  r.p_u.assign(nu, 0.0);
  r.p_x.assign(nx, 0.0);
  for (std::size_t t = 0; t < nst; ++t) {
    auto row = state.p_u.row(per_st ? t : 0);
    double hr = 0.0;
    for (std::size_t u = 0; u < nu; ++u) {
      r.p_u[u] += pst[t] * row[u];
      r.p_x[eff.mapping_table[u][t]] += pst[t] * row[u];
      hr -= xlogx(row[u]);
    }
    r.h_u_given_st += pst[t] * hr;
  }
  r.h_u = entropy_nats(r.p_u);
  r.h_x = entropy_nats(r.p_x);
  if (r.h_u < kNearDeterministic) r.near_deterministic.push_back("U");
  if (r.h_x < kNearDeterministic) r.near_deterministic.push_back("X");
  return r;
}

EntropyReport entropy_report(const std::vector<double>& p_x) {
  EntropyReport r;
  r.p_x = p_x;
  r.h_x = entropy_nats(p_x);
  if (r.h_x < kNearDeterministic) r.near_deterministic.push_back("X");
  return r;
}

}  // namespace cdtrade
