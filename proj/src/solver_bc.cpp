#include "cdtrade/solver_bc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "cdtrade/curve.hpp"
#include "cdtrade/parallel.hpp"
#include "cdtrade/rng.hpp"

namespace cdtrade {

namespace {

constexpr double kProbFloor = 1e-200;

inline double safe_log(double x) { return std::log(std::max(x, kUnderflowFloor)); }

void floor_row(std::span<double> row) {
  for (double& x : row) x = std::max(x, kProbFloor);
}

// Normalizes an accumulated posterior row; false when the mass underflowed.
bool normalize_mass(std::span<double> row) {
  double s = 0.0;
  for (double x : row) s += x;
  if (!(s > kUnderflowFloor)) return false;
  for (double& x : row) x /= s;
  return true;
}

// Maximizing step for a row entering linearly with gain g.
bool proximal_max_step(std::span<double> row, std::vector<double>& g, const ProximalSchedule& sch,
                       std::size_t iter) {
  for (double& x : g) x = -x;
  return proximal_min_step(row, g, sch, iter);
}

}  // namespace

BCSolver::BCSolver(const BCEffectiveChannel& eff) : eff_(eff) {
  const BCChannelSpec& spec = eff.spec();
  nc_ = eff.mode == CausalityMode::NonCausal;
  nst_ = spec.sizes.s_t;
  nu1_ = eff.num_strategies();
  nz1_ = spec.sizes.z1;
  nz2_ = spec.sizes.z2;
  ny_ = spec.sizes.y_fb;
  nshat_ = spec.sizes.s_hat;
  const std::size_t ns = spec.sizes.s;
  check_tensor_size(static_cast<double>(nst_) * nu1_ * nz1_ * nshat_, "reduced distortion table");

  c_.assign(nst_, 0.0);
  w1_.assign(nst_ * nu1_ * nz1_, 0.0);
  w2_.assign(nst_ * nu1_ * nz2_, 0.0);
  dm_.assign(nst_ * nu1_ * nz1_ * nshat_, 0.0);
  m_.assign(nst_ * nu1_ * ny_, 0.0);

  const auto& W = eff.p_z1z2_given_u_st_s;
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t s = 0; s < ns; ++s) {
      const double pss = spec.p_s[s] * spec.p_st_given_s(s, st);
      c_[st] += pss;
      if (pss == 0.0) continue;
      for (std::size_t u = 0; u < nu1_; ++u) {
        auto row = W.row((u * nst_ + st) * ns + s);
        double* w1 = &w1_[(st * nu1_ + u) * nz1_];
        double* w2 = &w2_[(st * nu1_ + u) * nz2_];
        double* dm = &dm_[(st * nu1_ + u) * nz1_ * nshat_];
        for (std::size_t z1 = 0; z1 < nz1_; ++z1) {
          double p1 = 0.0;
          for (std::size_t z2 = 0; z2 < nz2_; ++z2) {
            const double pw = pss * row[z1 * nz2_ + z2];
            p1 += pw;
            w2[z2] += pw;
          }
          if (p1 == 0.0) continue;
          w1[z1] += p1;
          for (std::size_t k = 0; k < nshat_; ++k) dm[z1 * nshat_ + k] += p1 * spec.distortion(s, k);
        }
      }
    }
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u = 0; u < nu1_; ++u)
      for (std::size_t z1 = 0; z1 < nz1_; ++z1)
        m_[(st * nu1_ + u) * ny_ + spec.feedback_map[z1]] += w1_[(st * nu1_ + u) * nz1_ + z1];
}

std::size_t BCSolver::default_u2_size() const {
  const auto& sz = eff_.spec().sizes;
  return std::min(sz.x * sz.s_t, sz.z2) + 3;
}

BCSolverState BCSolver::init_state(double alpha, double rho, std::uint64_t seed,
                                   const ProximalSchedule& schedule, std::optional<std::size_t> u2_size,
                                   std::optional<std::size_t> v_size) const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(rho >= 0.0)) throw ConfigError("rho must be >= 0");
  const std::size_t nu2 = u2_size.value_or(default_u2_size());
  const std::size_t nv = v_size.value_or(default_v_size());
  if (nu2 == 0 || nv == 0 || nu1_ == 0) throw ValidationError("init_state: zero-size alphabet");
  const std::size_t nr = nc_ ? nst_ : 1;

  BCSolverState S;
  S.alpha = alpha;
  S.rho = rho;
  S.schedule = schedule;
  S.p_u2 = CondDist::uniform({"r"}, {nr}, "u2", nu2);
  S.p_u1 = CondDist::uniform({"r", "u2"}, {nr, nu2}, "u1", nu1_);
  S.p_v = CondDist::uniform({"s_t", "u2", "u1", "y'"}, {nst_, nu2, nu1_, ny_}, "v", nv);
  S.q_u2 = CondDist::uniform({"z2"}, {nz2_}, "u2", nu2);
  S.q_u1 = CondDist::uniform({"u2", "z1"}, {nu2, nz1_}, "u1", nu1_);
  S.q_v = CondDist::uniform({"u2", "u1", "z1"}, {nu2, nu1_, nz1_}, "v", nv);
  S.est = CondDist::uniform({"u2", "u1", "v", "z1"}, {nu2, nu1_, nv, nz1_}, "s_hat", nshat_);

  SplitMix64 rng(seed);
  for (CondDist* cd : {&S.p_u2, &S.p_u1, &S.p_v, &S.est})
    for (std::size_t r = 0; r < cd->rows(); ++r) {
      auto d = dirichlet1(rng, cd->cols());
      std::copy(d.begin(), d.end(), cd->row(r).begin());
    }
  for (CondDist* cd : {&S.p_u2, &S.p_u1, &S.p_v})
    for (std::size_t r = 0; r < cd->rows(); ++r) floor_row(cd->row(r));

  update_posteriors(S);
  Terms t = terms(S);
  S.L = L_of(S, t);
  S.B = B_of(S, t);
  return S;
}

void BCSolver::update_posteriors(BCSolverState& S) const {
  const std::size_t nu2 = S.nu2(), nv = S.nv();
  auto& qu2 = S.q_u2.data();
  auto& qu1 = S.q_u1.data();
  auto& qv = S.q_v.data();
  std::fill(qu2.begin(), qu2.end(), 0.0);
  std::fill(qu1.begin(), qu1.end(), 0.0);
  std::fill(qv.begin(), qv.end(), 0.0);
  const auto& pu2 = S.p_u2.data();
  const auto& pu1 = S.p_u1.data();
  const auto& pv = S.p_v.data();
  const auto& phi = eff_.spec().feedback_map;

  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u2 = 0; u2 < nu2; ++u2) {
      const std::size_t r = prior_row(st);
      const double a = pu2[r * nu2 + u2];
      for (std::size_t u1 = 0; u1 < nu1_; ++u1) {
        const double p = a * pu1[(r * nu2 + u2) * nu1_ + u1];
        const double* w1 = &w1_[(st * nu1_ + u1) * nz1_];
        const double* w2 = &w2_[(st * nu1_ + u1) * nz2_];
        for (std::size_t z2 = 0; z2 < nz2_; ++z2) qu2[z2 * nu2 + u2] += p * w2[z2];
        for (std::size_t z1 = 0; z1 < nz1_; ++z1) {
          if (w1[z1] == 0.0) continue;
          const double pw = p * w1[z1];
          qu1[(u2 * nz1_ + z1) * nu1_ + u1] += pw;
          const double* v_row = &pv[(((st * nu2 + u2) * nu1_ + u1) * ny_ + phi[z1]) * nv];
          double* out = &qv[((u2 * nu1_ + u1) * nz1_ + z1) * nv];
          for (std::size_t v = 0; v < nv; ++v) out[v] += pw * v_row[v];
        }
      }
    }

  // Underflowed rows are rebuilt without the prior factors; rows no channel
  // output can reach stay uniform and carry no weight.
  for (std::size_t u2 = 0; u2 < nu2; ++u2)
    for (std::size_t u1 = 0; u1 < nu1_; ++u1)
      for (std::size_t z1 = 0; z1 < nz1_; ++z1) {
        auto row = S.q_v.row((u2 * nu1_ + u1) * nz1_ + z1);
        if (normalize_mass(row)) continue;
        std::fill(row.begin(), row.end(), 0.0);
        bool reachable = false;
        for (std::size_t st = 0; st < nst_; ++st) {
          const double w = w1_[(st * nu1_ + u1) * nz1_ + z1];
          if (w == 0.0) continue;
          reachable = true;
          const double* v_row = &pv[(((st * nu2 + u2) * nu1_ + u1) * ny_ + phi[z1]) * nv];
          for (std::size_t v = 0; v < nv; ++v) row[v] += w * v_row[v];
        }
        if (normalize_in_place(row) && reachable) S.flags |= kDegenerateRow;
      }
  for (std::size_t u2 = 0; u2 < nu2; ++u2)
    for (std::size_t z1 = 0; z1 < nz1_; ++z1) {
      auto row = S.q_u1.row(u2 * nz1_ + z1);
      if (normalize_mass(row)) continue;
      std::fill(row.begin(), row.end(), 0.0);
      bool reachable = false;
      for (std::size_t st = 0; st < nst_; ++st)
        for (std::size_t u1 = 0; u1 < nu1_; ++u1) {
          row[u1] += w1_[(st * nu1_ + u1) * nz1_ + z1];
          reachable |= row[u1] > 0.0;
        }
      if (normalize_in_place(row) && reachable) S.flags |= kDegenerateRow;
    }
  for (std::size_t z2 = 0; z2 < nz2_; ++z2) {
    auto row = S.q_u2.row(z2);
    if (normalize_mass(row)) continue;
    std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(nu2));
    bool reachable = false;
    for (std::size_t i = 0; i < nst_ * nu1_; ++i) reachable |= w2_[i * nz2_ + z2] > 0.0;
    if (reachable) S.flags |= kDegenerateRow;
  }
}

void BCSolver::linear_terms(const BCSolverState& S, Terms& t) const {
  const std::size_t nu2 = S.nu2(), nv = S.nv();
  const double al = S.alpha;
  const auto& est = S.est.data();
  const auto& phi = eff_.spec().feedback_map;

  auto logs = [](const std::vector<double>& in, std::vector<double>& out) {
    out.resize(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = safe_log(in[i]);
  };
  logs(S.q_u2.data(), t.lqu2);
  logs(S.q_u1.data(), t.lqu1);
  logs(S.q_v.data(), t.lqv);

  // E[st][u2][u1][v][z1]
  t.E.assign(nst_ * nu2 * nu1_ * nv * nz1_, 0.0);
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u2 = 0; u2 < nu2; ++u2)
      for (std::size_t u1 = 0; u1 < nu1_; ++u1) {
        const double* w1 = &w1_[(st * nu1_ + u1) * nz1_];
        const double* dm = &dm_[(st * nu1_ + u1) * nz1_ * nshat_];
        for (std::size_t v = 0; v < nv; ++v) {
          double* e = &t.E[(((st * nu2 + u2) * nu1_ + u1) * nv + v) * nz1_];
          const double* er = &est[((u2 * nu1_ + u1) * nv + v) * nz1_ * nshat_];
          for (std::size_t z1 = 0; z1 < nz1_; ++z1) {
            if (w1[z1] == 0.0) continue;
            double acc = 0.0;
            for (std::size_t k = 0; k < nshat_; ++k) acc += er[z1 * nshat_ + k] * dm[z1 * nshat_ + k];
            e[z1] = acc;
          }
        }
      }

  // A[st][u2][u1][y'][v] = sum_{z1 in y'} alpha w1 (log qU1 + log qV) - rho E
  t.A.assign(nst_ * nu2 * nu1_ * ny_ * nv, 0.0);
  t.F2.assign(nst_ * nu2 * nu1_, 0.0);
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u2 = 0; u2 < nu2; ++u2)
      for (std::size_t u1 = 0; u1 < nu1_; ++u1) {
        const std::size_t i = (st * nu2 + u2) * nu1_ + u1;
        const double* w1 = &w1_[(st * nu1_ + u1) * nz1_];
        const double* e = &t.E[i * nv * nz1_];
        double* a_row = &t.A[i * ny_ * nv];
        for (std::size_t z1 = 0; z1 < nz1_; ++z1) {
          if (w1[z1] == 0.0) continue;
          double* a = a_row + phi[z1] * nv;
          const double base = al * w1[z1] * t.lqu1[(u2 * nz1_ + z1) * nu1_ + u1];
          const double* lv = &t.lqv[((u2 * nu1_ + u1) * nz1_ + z1) * nv];
          for (std::size_t v = 0; v < nv; ++v)
            a[v] += (al > 0.0 ? base + al * w1[z1] * lv[v] : 0.0) - S.rho * e[v * nz1_ + z1];
        }
        if (al < 1.0) {
          const double* w2 = &w2_[(st * nu1_ + u1) * nz2_];
          double f = 0.0;
          for (std::size_t z2 = 0; z2 < nz2_; ++z2)
            if (w2[z2] > 0.0) f += w2[z2] * t.lqu2[z2 * nu2 + u2];
          t.F2[i] = (1.0 - al) * f;
        }
      }
}

void BCSolver::row_values(const BCSolverState& S, Terms& t) const {
  const std::size_t nu2 = S.nu2(), nv = S.nv();
  const double al = S.alpha;
  const auto& pv = S.p_v.data();
  t.G1.assign(nst_ * nu2 * nu1_, 0.0);
  for (std::size_t i = 0; i < t.G1.size(); ++i) {
    const std::size_t st = i / (nu2 * nu1_), u1 = i % nu1_;
    double g = t.F2[i];
    for (std::size_t y = 0; y < ny_; ++y) {
      const double m = m_[(st * nu1_ + u1) * ny_ + y];
      if (m == 0.0) continue;
      const std::size_t base = (i * ny_ + y) * nv;
      for (std::size_t v = 0; v < nv; ++v) {
        if (pv[base + v] == 0.0) continue;
        g += pv[base + v] * (t.A[base + v] - (al > 0.0 ? al * m * t.lpv[base + v] : 0.0));
      }
    }
    t.G1[i] = g;
  }
}

BCSolver::Terms BCSolver::terms(const BCSolverState& S) const {
  Terms t;
  linear_terms(S, t);
  t.lpv = S.p_v.data();
  for (double& x : t.lpv) x = std::log(x);
  row_values(S, t);
  return t;
}

std::size_t BCSolver::pu1_step(BCSolverState& S, Terms& t) const {
  const std::size_t nu2 = S.nu2();
  const double al = S.alpha;
  std::size_t moved = 0;
  std::vector<double> g(nu1_);
  const std::size_t nr = nc_ ? nst_ : 1;
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t u2 = 0; u2 < nu2; ++u2) {
      auto row = S.p_u1.row(r * nu2 + u2);
      std::fill(g.begin(), g.end(), 0.0);
      double c = 0.0;
      for (std::size_t st = 0; st < nst_; ++st) {
        if (nc_ && st != r) continue;
        c += c_[st];
        const double* G = &t.G1[(st * nu2 + u2) * nu1_];
        for (std::size_t u1 = 0; u1 < nu1_; ++u1) g[u1] += G[u1];
      }
      if (c <= 0.0) continue;
      if (al > 0.0) {
        for (std::size_t u1 = 0; u1 < nu1_; ++u1) row[u1] = g[u1] / (al * c);
        if (softmax_in_place(row)) S.flags |= kNumericalUnderflow;
        floor_row(row);
      } else if (proximal_max_step(row, g, S.schedule, S.iteration)) {
        ++moved;
      }
    }
  return moved;
}

std::size_t BCSolver::pu2_step(BCSolverState& S, Terms& t) const {
  const std::size_t nu2 = S.nu2();
  const double al = S.alpha;
  const auto& pu1 = S.p_u1.data();
  std::size_t moved = 0;
  const std::size_t nr = nc_ ? nst_ : 1;
  std::vector<double> g(nu2);
  for (std::size_t r = 0; r < nr; ++r) {
    std::fill(g.begin(), g.end(), 0.0);
    double c = 0.0;
    for (std::size_t st = 0; st < nst_; ++st) {
      if (nc_ && st != r) continue;
      c += c_[st];
      for (std::size_t u2 = 0; u2 < nu2; ++u2) {
        const double* p = &pu1[(r * nu2 + u2) * nu1_];
        const double* G = &t.G1[(st * nu2 + u2) * nu1_];
        double acc = 0.0;
        for (std::size_t u1 = 0; u1 < nu1_; ++u1) {
          if (p[u1] == 0.0) continue;
          acc += p[u1] * (G[u1] - (al > 0.0 ? al * c_[st] * std::log(p[u1]) : 0.0));
        }
        g[u2] += acc;
      }
    }
    if (c <= 0.0) continue;
    auto row = S.p_u2.row(r);
    if (al < 1.0) {
      for (std::size_t u2 = 0; u2 < nu2; ++u2) row[u2] = g[u2] / ((1.0 - al) * c);
      if (softmax_in_place(row)) S.flags |= kNumericalUnderflow;
      floor_row(row);
    } else if (proximal_max_step(row, g, S.schedule, S.iteration)) {
      ++moved;
    }
  }
  return moved;
}

std::size_t BCSolver::pv_step(BCSolverState& S, Terms& t) const {
  const std::size_t nu2 = S.nu2(), nv = S.nv();
  const double al = S.alpha;
  const double log_floor = std::log(kProbFloor);
  std::size_t moved = 0;
  std::vector<double> g(nv);
  for (std::size_t i = 0; i < nst_ * nu2 * nu1_; ++i) {
    const std::size_t st = i / (nu2 * nu1_), u1 = i % nu1_;
    for (std::size_t y = 0; y < ny_; ++y) {
      const std::size_t r = i * ny_ + y;
      auto row = S.p_v.row(r);
      double* lp = &t.lpv[r * nv];
      const double m = m_[(st * nu1_ + u1) * ny_ + y];
      if (m == 0.0) {
        std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(nv));
        std::fill(lp, lp + nv, -std::log(static_cast<double>(nv)));
        continue;
      }
      if (nv == 1) continue;
      if (al == 0.0) {
        std::copy(t.A.begin() + r * nv, t.A.begin() + (r + 1) * nv, g.begin());
        if (proximal_max_step(row, g, S.schedule, S.iteration)) ++moved;
        for (std::size_t v = 0; v < nv; ++v) lp[v] = std::log(row[v]);
        continue;
      }
      double mx = -INFINITY;
      for (std::size_t v = 0; v < nv; ++v) {
        lp[v] = t.A[r * nv + v] / (al * m);
        mx = std::max(mx, lp[v]);
      }
      if (!std::isfinite(mx)) {
        S.flags |= kNumericalUnderflow;
        std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(nv));
        std::fill(lp, lp + nv, -std::log(static_cast<double>(nv)));
        continue;
      }
      double sum = 0.0;
      for (std::size_t v = 0; v < nv; ++v) {
        row[v] = std::exp(lp[v] - mx);
        sum += row[v];
      }
      const double shift = mx + std::log(sum);
      for (std::size_t v = 0; v < nv; ++v) {
        lp[v] = std::max(lp[v] - shift, log_floor);
        row[v] = std::max(row[v] / sum, kProbFloor);
      }
    }
  }
  return moved;
}

std::size_t BCSolver::estimator_step(BCSolverState& S, Terms& t) const {
  const std::size_t nu2 = S.nu2(), nv = S.nv();
  const auto& pu2 = S.p_u2.data();
  const auto& pu1 = S.p_u1.data();
  const auto& pv = S.p_v.data();
  const auto& phi = eff_.spec().feedback_map;
  // a[u2][u1][v][z1][sh]
  auto& a = t.a;
  a.assign(nu2 * nu1_ * nv * nz1_ * nshat_, 0.0);
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u2 = 0; u2 < nu2; ++u2) {
      const std::size_t r = prior_row(st);
      for (std::size_t u1 = 0; u1 < nu1_; ++u1) {
        const double p = pu2[r * nu2 + u2] * pu1[(r * nu2 + u2) * nu1_ + u1];
        if (p == 0.0) continue;
        const double* w1 = &w1_[(st * nu1_ + u1) * nz1_];
        const double* dm = &dm_[(st * nu1_ + u1) * nz1_ * nshat_];
        for (std::size_t z1 = 0; z1 < nz1_; ++z1) {
          if (w1[z1] == 0.0) continue;
          const double* v_row = &pv[(((st * nu2 + u2) * nu1_ + u1) * ny_ + phi[z1]) * nv];
          for (std::size_t v = 0; v < nv; ++v) {
            const double f = p * v_row[v];
            double* out = &a[(((u2 * nu1_ + u1) * nv + v) * nz1_ + z1) * nshat_];
            for (std::size_t k = 0; k < nshat_; ++k) out[k] += f * dm[z1 * nshat_ + k];
          }
        }
      }
    }
  std::size_t moved = 0;
  for (std::size_t r = 0; r < S.est.rows(); ++r) {
    std::span<const double> ar(a.data() + r * nshat_, nshat_);
    if (proximal_min_step(S.est.row(r), ar, S.schedule, S.iteration)) ++moved;
  }
  return moved;
}

double BCSolver::L_of(const BCSolverState& S, const Terms& t) const {
  const std::size_t nu2 = S.nu2();
  const double al = S.alpha;
  const auto& pu2 = S.p_u2.data();
  const auto& pu1 = S.p_u1.data();
  double L = 0.0;
  for (std::size_t st = 0; st < nst_; ++st) {
    const std::size_t r = prior_row(st);
    for (std::size_t u2 = 0; u2 < nu2; ++u2) {
      const double a = pu2[r * nu2 + u2];
      if (a == 0.0) continue;
      double inner = al < 1.0 ? -(1.0 - al) * c_[st] * std::log(a) : 0.0;
      for (std::size_t u1 = 0; u1 < nu1_; ++u1) {
        const double p = pu1[(r * nu2 + u2) * nu1_ + u1];
        if (p == 0.0) continue;
        inner += p * (t.G1[(st * nu2 + u2) * nu1_ + u1] - (al > 0.0 ? al * c_[st] * std::log(p) : 0.0));
      }
      L += a * inner;
    }
  }
  return L;
}

double BCSolver::B_of(const BCSolverState& S, const Terms& t) const {
  const std::size_t nu2 = S.nu2(), nv = S.nv();
  const double al = S.alpha;
  const auto& pu2 = S.p_u2.data();
  const auto& pu1 = S.p_u1.data();

  // H[st][u2][u1] = F2 - (1-a) c log pU2 - a c log pU1 + sum_y' max_v (A - a m log pV)
  std::vector<double> H(nst_ * nu2 * nu1_, 0.0);
  for (std::size_t st = 0; st < nst_; ++st) {
    const std::size_t r = prior_row(st);
    for (std::size_t u2 = 0; u2 < nu2; ++u2)
      for (std::size_t u1 = 0; u1 < nu1_; ++u1) {
        const std::size_t i = (st * nu2 + u2) * nu1_ + u1;
        double h = t.F2[i];
        if (al < 1.0) h -= (1.0 - al) * c_[st] * std::log(pu2[r * nu2 + u2]);
        if (al > 0.0) h -= al * c_[st] * std::log(pu1[(r * nu2 + u2) * nu1_ + u1]);
        for (std::size_t y = 0; y < ny_; ++y) {
          const double m = m_[(st * nu1_ + u1) * ny_ + y];
          if (m == 0.0) continue;
          const std::size_t base = (i * ny_ + y) * nv;
          double best = -INFINITY;
          for (std::size_t v = 0; v < nv; ++v)
            best = std::max(best, t.A[base + v] - (al > 0.0 ? al * m * t.lpv[base + v] : 0.0));
          h += best;
        }
        H[i] = h;
      }
  }

  if (nc_) {
    double B = 0.0;
    for (std::size_t st = 0; st < nst_; ++st) {
      if (c_[st] <= 0.0) continue;
      B += *std::max_element(H.begin() + st * nu2 * nu1_, H.begin() + (st + 1) * nu2 * nu1_);
    }
    return B;
  }
  double best = -INFINITY;
  for (std::size_t k = 0; k < nu2 * nu1_; ++k) {
    double h = 0.0;
    for (std::size_t st = 0; st < nst_; ++st) h += H[st * nu2 * nu1_ + k];
    best = std::max(best, h);
  }
  return best;
}

std::size_t BCSolver::step(BCSolverState& S, Terms& t) const {
  ++S.iteration;
  // G1 depends only on the posteriors, the estimator and p_v, so both
  // prior blocks share it. Linear prior blocks are covered by the max in B;
  // only the estimator is not, so only its movement is reported.
  pu1_step(S, t);
  pu2_step(S, t);
  pv_step(S, t);
  const std::size_t moved = estimator_step(S, t);
  update_posteriors(S);
  linear_terms(S, t);
  row_values(S, t);
  S.L = L_of(S, t);
  S.B = B_of(S, t);
  return moved;
}

std::size_t BCSolver::iterate(BCSolverState& S) const {
  Terms t = terms(S);
  return step(S, t);
}

double BCSolver::compute_L(const BCSolverState& S) const { return L_of(S, terms(S)); }
double BCSolver::compute_B(const BCSolverState& S) const { return B_of(S, terms(S)); }

JointTensor BCSolver::joint1(const BCSolverState& S) const {
  const std::size_t nu2 = S.nu2(), nv = S.nv();
  check_tensor_size(static_cast<double>(nst_) * nu2 * nu1_ * nz1_ * nv, "broadcast joint");
  const auto& phi = eff_.spec().feedback_map;
  std::vector<double> vals(nst_ * nu2 * nu1_ * nz1_ * nv, 0.0);
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u2 = 0; u2 < nu2; ++u2)
      for (std::size_t u1 = 0; u1 < nu1_; ++u1) {
        const std::size_t r = prior_row(st);
        const double p = S.p_u2(r, u2) * S.p_u1(r * nu2 + u2, u1);
        const std::size_t i = (st * nu2 + u2) * nu1_ + u1;
        for (std::size_t z1 = 0; z1 < nz1_; ++z1) {
          const double pw = p * w1_[(st * nu1_ + u1) * nz1_ + z1];
          if (pw == 0.0) continue;
          auto v_row = S.p_v.row(i * ny_ + phi[z1]);
          for (std::size_t v = 0; v < nv; ++v) vals[(i * nz1_ + z1) * nv + v] = pw * v_row[v];
        }
      }
  return JointTensor({"s_t", "u2", "u1", "z1", "v"}, {nst_, nu2, nu1_, nz1_, nv}, std::move(vals));
}

double BCSolver::rate1(const BCSolverState& S) const {
  const JointTensor j = joint1(S);
  return conditional_mutual_information(j, {"u1"}, {"z1"}, {"u2"}) -
         conditional_mutual_information(j, {"u1"}, {"s_t"}, {"u2"}) -
         conditional_mutual_information(j, {"v"}, {"s_t"}, {"u1", "u2", "z1"});
}

double BCSolver::rate02(const BCSolverState& S) const {
  const std::size_t nu2 = S.nu2();
  std::vector<double> vals(nst_ * nu2 * nz2_, 0.0);
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u2 = 0; u2 < nu2; ++u2) {
      const std::size_t r = prior_row(st);
      for (std::size_t u1 = 0; u1 < nu1_; ++u1) {
        const double p = S.p_u2(r, u2) * S.p_u1(r * nu2 + u2, u1);
        for (std::size_t z2 = 0; z2 < nz2_; ++z2)
          vals[(st * nu2 + u2) * nz2_ + z2] += p * w2_[(st * nu1_ + u1) * nz2_ + z2];
      }
    }
  const JointTensor j({"s_t", "u2", "z2"}, {nst_, nu2, nz2_}, std::move(vals));
  return mutual_information(j, {"u2"}, {"z2"}) - mutual_information(j, {"u2"}, {"s_t"});
}

double BCSolver::distortion(const BCSolverState& S) const {
  const std::size_t nu2 = S.nu2(), nv = S.nv();
  const auto& phi = eff_.spec().feedback_map;
  double D = 0.0;
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u2 = 0; u2 < nu2; ++u2)
      for (std::size_t u1 = 0; u1 < nu1_; ++u1) {
        const std::size_t r = prior_row(st);
        const double p = S.p_u2(r, u2) * S.p_u1(r * nu2 + u2, u1);
        if (p == 0.0) continue;
        const std::size_t i = (st * nu2 + u2) * nu1_ + u1;
        const double* dm = &dm_[(st * nu1_ + u1) * nz1_ * nshat_];
        for (std::size_t z1 = 0; z1 < nz1_; ++z1) {
          if (w1_[(st * nu1_ + u1) * nz1_ + z1] == 0.0) continue;
          auto v_row = S.p_v.row(i * ny_ + phi[z1]);
          for (std::size_t v = 0; v < nv; ++v) {
            auto e = S.est.row(((u2 * nu1_ + u1) * nv + v) * nz1_ + z1);
            double acc = 0.0;
            for (std::size_t k = 0; k < nshat_; ++k) acc += e[k] * dm[z1 * nshat_ + k];
            D += p * v_row[v] * acc;
          }
        }
      }
  return D;
}

RegionPoint BCSolver::point(const BCSolverState& S) const {
  RegionPoint pt;
  pt.alpha = S.alpha;
  pt.rho1 = S.rho;
  pt.r1 = rate1(S);
  pt.r0r2 = rate02(S);
  pt.d1 = distortion(S);
  pt.iterations = S.iteration;
  pt.L = S.L;
  pt.B = S.B;
  pt.gap = S.B - S.L;
  pt.flags = S.flags | (eff_.truncated ? kStrategyTruncated : kNoFlags);
  return pt;
}

BCSolveResult BCSolver::solve(const BCSolveOptions& opt) const {
  if (!(opt.delta > 0.0)) throw ConfigError("delta must be > 0");
  BCSolveResult res;
  res.state = init_state(opt.alpha, opt.rho, opt.seed, opt.schedule, opt.u2_size, opt.v_size);
  BCSolverState& S = res.state;
  Terms t = terms(S);
  bool converged = false;
  while (S.iteration < opt.max_iters) {
    const std::size_t moved = step(S, t);
    if (opt.keep_trace) res.trace.emplace_back(S.L, S.B);
    if (S.B - S.L <= opt.delta && moved == 0) {
      converged = true;
      break;
    }
  }
  if (!converged) S.flags |= kMaxIters;
  res.point = point(S);
  return res;
}

RegionSweep sweep_region(const BCSolver& solver, const RegionSweepOptions& opt) {
  if (opt.alphas.empty() || opt.rhos.empty()) throw ConfigError("alpha and rho grids must be nonempty");
  for (double a : opt.alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha grid values must lie in [0, 1]");
  for (double r : opt.rhos)
    if (!(r >= 0.0)) throw ConfigError("rho grid values must be >= 0");
  const std::size_t restarts = std::max<std::size_t>(opt.restarts, 1);
  const std::size_t na = opt.alphas.size(), nr = opt.rhos.size();

  RegionSweep out;
  out.cells.resize(na * nr);
  parallel_for(na * nr, opt.jobs, [&](std::size_t idx) {
    auto t0 = std::chrono::steady_clock::now();
    RegionCell& cell = out.cells[idx];
    cell.alpha_index = idx / nr;
    cell.rho_index = idx % nr;
    double best = -INFINITY;
    for (std::size_t k = 0; k < restarts; ++k) {
      BCSolveOptions o = opt.base;
      o.alpha = opt.alphas[cell.alpha_index];
      o.rho = opt.rhos[cell.rho_index];
      o.seed = derive_seed(opt.base.seed, cell.alpha_index, cell.rho_index, k);
      BCSolveResult r = solver.solve(o);
      TraceCheck tc = check_trace(r.trace);
      cell.bound_violations += tc.bound_violations;
      cell.ascent_violations += tc.ascent_violations;
      cell.restart_weighted.push_back(r.state.L);
      if (r.state.L > best) {
        best = r.state.L;
        cell.point = r.point;
      }
    }
    cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  out.envelope.resize(na);
  for (std::size_t a = 0; a < na; ++a) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t r = 0; r < nr; ++r) {
      const RegionPoint& p = out.cells[a * nr + r].point;
      pts.emplace_back(p.d1, p.weighted());
    }
    std::sort(pts.begin(), pts.end());
    for (const auto& p : pts)
      if (out.envelope[a].empty() || p.second > out.envelope[a].back().second) out.envelope[a].push_back(p);
  }
  return out;
}

std::vector<SliceViolation> check_region_slices(const std::vector<RegionPoint>& pts, double tol,
                                                double dtol) {
  std::vector<SliceViolation> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double a = pts[i].alpha;
    const double own = pts[i].weighted();
    double worst = 0.0;
    std::size_t against = i;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j == i || pts[j].d1 > pts[i].d1 + dtol) continue;
      const double other = a * pts[j].r1 + (1.0 - a) * pts[j].r0r2;
      if (other - own > worst) {
        worst = other - own;
        against = j;
      }
    }
    if (worst > tol) out.push_back({i, against, worst});
  }
  return out;
}

}  // namespace cdtrade
