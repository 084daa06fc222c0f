#include "cdtrade/solver_p2p.hpp"

#include <algorithm>
#include <cmath>

#include "cdtrade/errors.hpp"
#include "cdtrade/rng.hpp"

namespace cdtrade {

namespace {

// Multiplicative blocks never hold exact zeros, so their logs stay finite.
constexpr double kProbFloor = 1e-200;

inline double safe_log(double x) { return std::log(std::max(x, kUnderflowFloor)); }

void floor_row(std::span<double> row) {
  for (double& x : row) x = std::max(x, kProbFloor);
}

}  // namespace

P2PSolver::P2PSolver(const EffectiveChannel& eff) : eff_(eff) {
  const ChannelSpec& spec = eff.spec();
  nc_ = eff.mode == CausalityMode::NonCausal;
  nst_ = spec.sizes.s_t;
  nu_ = eff.num_strategies();
  nz_ = spec.sizes.z;
  ny_ = spec.sizes.y_fb;
  nshat_ = spec.sizes.s_hat;
  const std::size_t ns = spec.sizes.s;
  check_tensor_size(static_cast<double>(nst_) * nu_ * nz_ * nshat_, "reduced distortion table");

  c_.assign(nst_, 0.0);
  w_.assign(nst_ * nu_ * nz_, 0.0);
  dm_.assign(nst_ * nu_ * nz_ * nshat_, 0.0);
  m_.assign(nst_ * nu_ * ny_, 0.0);
  zs_of_y_.assign(ny_, {});
  for (std::size_t z = 0; z < nz_; ++z) zs_of_y_[spec.feedback_map[z]].push_back(z);

  const auto& W = eff.p_z_given_u_st_s;
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t s = 0; s < ns; ++s) {
      const double pss = spec.p_s[s] * spec.p_st_given_s(s, st);
      c_[st] += pss;
      if (pss == 0.0) continue;
      for (std::size_t u = 0; u < nu_; ++u) {
        auto row = W.row((u * nst_ + st) * ns + s);
        double* w = &w_[(st * nu_ + u) * nz_];
        double* dm = &dm_[(st * nu_ + u) * nz_ * nshat_];
        for (std::size_t z = 0; z < nz_; ++z) {
          const double pw = pss * row[z];
          if (pw == 0.0) continue;
          w[z] += pw;
          for (std::size_t k = 0; k < nshat_; ++k) dm[z * nshat_ + k] += pw * spec.distortion(s, k);
        }
      }
    }
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u = 0; u < nu_; ++u)
      for (std::size_t z = 0; z < nz_; ++z)
        m_[(st * nu_ + u) * ny_ + spec.feedback_map[z]] += w_[(st * nu_ + u) * nz_ + z];
}

SolverState P2PSolver::init_state(double rho, std::uint64_t seed, const ProximalSchedule& schedule,
                                  std::optional<std::size_t> v_size) const {
  if (!(rho >= 0.0)) throw ConfigError("rho must be >= 0");
  const std::size_t nv = v_size.value_or(default_v_size());
  if (nv == 0 || nu_ == 0) throw ValidationError("init_state: zero-size alphabet");
  const std::size_t nr = nc_ ? nst_ : 1;

  SolverState st;
  st.rho = rho;
  st.schedule = schedule;
  st.p_u = CondDist::uniform({"r"}, {nr}, "u", nu_);
  st.p_v = CondDist::uniform({"s_t", "u", "y'"}, {nst_, nu_, ny_}, "v", nv);
  st.q_u = CondDist::uniform({"z"}, {nz_}, "u", nu_);
  st.q_v = CondDist::uniform({"u", "z"}, {nu_, nz_}, "v", nv);
  st.est = CondDist::uniform({"u", "v", "z"}, {nu_, nv, nz_}, "s_hat", nshat_);

  SplitMix64 rng(seed);
  for (CondDist* cd : {&st.p_u, &st.p_v, &st.est})
    for (std::size_t r = 0; r < cd->rows(); ++r) {
      auto d = dirichlet1(rng, cd->cols());
      std::copy(d.begin(), d.end(), cd->row(r).begin());
    }
  for (CondDist* cd : {&st.p_u, &st.p_v})
    for (std::size_t r = 0; r < cd->rows(); ++r) floor_row(cd->row(r));

  update_posteriors(st);
  st.L = compute_L(st);
  st.B = compute_B(st);
  return st;
}

void P2PSolver::update_posteriors(SolverState& S) const {
  const std::size_t nv = S.nv();
  auto& qu = S.q_u.data();
  auto& qv = S.q_v.data();
  std::fill(qu.begin(), qu.end(), 0.0);
  std::fill(qv.begin(), qv.end(), 0.0);
  const auto& pu = S.p_u.data();
  const auto& pv = S.p_v.data();
  const auto& phi = eff_.spec().feedback_map;

  // qv holds unnormalized sum_st pU w pV; qu[z][u] its v-marginal
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u = 0; u < nu_; ++u) {
      const double p = pu[prior_row(st) * nu_ + u];
      const double* w = &w_[(st * nu_ + u) * nz_];
      for (std::size_t z = 0; z < nz_; ++z) {
        if (w[z] == 0.0) continue;
        const double pw = p * w[z];
        qu[z * nu_ + u] += pw;
        const double* v_row = &pv[((st * nu_ + u) * ny_ + phi[z]) * nv];
        double* out = &qv[(u * nz_ + z) * nv];
        for (std::size_t v = 0; v < nv; ++v) out[v] += pw * v_row[v];
      }
    }

  for (std::size_t u = 0; u < nu_; ++u)
    for (std::size_t z = 0; z < nz_; ++z) {
      auto row = S.q_v.row(u * nz_ + z);
      double s = 0.0;
      for (double x : row) s += x;
      if (s > kUnderflowFloor) {
        for (double& x : row) x /= s;
        continue;
      }
      // Underflowed mass: retry without the prior factor. Structurally
      // unreachable (u,z) never carries weight in L and is left uniform silently.
      std::fill(row.begin(), row.end(), 0.0);
      bool reachable = false;
      for (std::size_t st = 0; st < nst_; ++st) {
        const double w = w_[(st * nu_ + u) * nz_ + z];
        if (w == 0.0) continue;
        reachable = true;
        const double* v_row = &pv[((st * nu_ + u) * ny_ + phi[z]) * nv];
        for (std::size_t v = 0; v < nv; ++v) row[v] += w * v_row[v];
      }
      if (normalize_in_place(row) && reachable) S.flags |= kDegenerateRow;
    }

  for (std::size_t z = 0; z < nz_; ++z) {
    auto row = S.q_u.row(z);
    double s = 0.0;
    for (double x : row) s += x;
    if (s > kUnderflowFloor) {
      for (double& x : row) x /= s;
      continue;
    }
    std::fill(row.begin(), row.end(), 0.0);
    bool reachable = false;
    for (std::size_t st = 0; st < nst_; ++st)
      for (std::size_t u = 0; u < nu_; ++u) {
        row[u] += w_[(st * nu_ + u) * nz_ + z];
        reachable |= row[u] > 0.0;
      }
    if (normalize_in_place(row) && reachable) S.flags |= kDegenerateRow;
  }
}

void P2PSolver::expected_costs(const SolverState& S, std::vector<double>& E) const {
  const std::size_t nv = S.nv();
  E.assign(nst_ * nu_ * nv * nz_, 0.0);
  const auto& est = S.est.data();
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u = 0; u < nu_; ++u) {
      const double* w = &w_[(st * nu_ + u) * nz_];
      const double* dm = &dm_[(st * nu_ + u) * nz_ * nshat_];
      for (std::size_t v = 0; v < nv; ++v) {
        double* e = &E[((st * nu_ + u) * nv + v) * nz_];
        const double* er = &est[(u * nv + v) * nz_ * nshat_];
        for (std::size_t z = 0; z < nz_; ++z) {
          if (w[z] == 0.0) continue;
          double acc = 0.0;
          for (std::size_t k = 0; k < nshat_; ++k) acc += er[z * nshat_ + k] * dm[z * nshat_ + k];
          e[z] = acc;
        }
      }
    }
}

std::vector<double> P2PSolver::expected_costs(const SolverState& S) const {
  std::vector<double> E;
  expected_costs(S, E);
  return E;
}

void P2PSolver::linear_terms(const SolverState& S, Terms& t) const {
  const std::size_t nv = S.nv();
  expected_costs(S, t.E);
  const auto& E = t.E;
  const auto& qu = S.q_u.data();
  const auto& qv = S.q_v.data();
  t.lqu.resize(qu.size());
  t.lqv.resize(qv.size());
  for (std::size_t i = 0; i < qu.size(); ++i) t.lqu[i] = safe_log(qu[i]);
  for (std::size_t i = 0; i < qv.size(); ++i) t.lqv[i] = safe_log(qv[i]);
  const auto& phi = eff_.spec().feedback_map;

  t.A.assign(nst_ * nu_ * ny_ * nv, 0.0);
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u = 0; u < nu_; ++u) {
      const double* w = &w_[(st * nu_ + u) * nz_];
      const double* e = &E[(st * nu_ + u) * nv * nz_];
      double* a_su = &t.A[(st * nu_ + u) * ny_ * nv];
      for (std::size_t z = 0; z < nz_; ++z) {
        if (w[z] == 0.0) continue;
        double* a = a_su + phi[z] * nv;
        const double base = w[z] * t.lqu[z * nu_ + u];
        const double* lv = &t.lqv[(u * nz_ + z) * nv];
        for (std::size_t v = 0; v < nv; ++v) a[v] += base + w[z] * lv[v] - S.rho * e[v * nz_ + z];
      }
    }
}

P2PSolver::Terms P2PSolver::terms(const SolverState& S) const {
  Terms t;
  linear_terms(S, t);
  t.lpv = S.p_v.data();
  for (double& x : t.lpv) x = std::log(x);
  return t;
}

void P2PSolver::update_pu(SolverState& S) const {
  Terms t = terms(S);
  pu_step(S, t);
}
void P2PSolver::update_pv(SolverState& S) const {
  Terms t = terms(S);
  pv_step(S, t);
}
double P2PSolver::compute_L(const SolverState& S) const { return L_of(S, terms(S)); }
double P2PSolver::compute_B(const SolverState& S) const { return B_of(S, terms(S)); }

void P2PSolver::pu_step(SolverState& S, Terms& t) const {
  const std::size_t nv = S.nv();
  const auto& A = t.A;
  const auto& lpv = t.lpv;
  const auto& pv = S.p_v.data();

  // G[st][u] = sum_{y',v} pV (A - m log pV)
  auto& G = t.G;
  G.assign(nst_ * nu_, 0.0);
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u = 0; u < nu_; ++u) {
      double g = 0.0;
      for (std::size_t y = 0; y < ny_; ++y) {
        const double m = m_[(st * nu_ + u) * ny_ + y];
        if (m == 0.0) continue;
        const std::size_t base = ((st * nu_ + u) * ny_ + y) * nv;
        for (std::size_t v = 0; v < nv; ++v) g += pv[base + v] * (A[base + v] - m * lpv[base + v]);
      }
      G[st * nu_ + u] = g;
    }

  if (nc_) {
    for (std::size_t st = 0; st < nst_; ++st) {
      if (c_[st] <= 0.0) continue;
      auto row = S.p_u.row(st);
      for (std::size_t u = 0; u < nu_; ++u) row[u] = G[st * nu_ + u] / c_[st];
      if (softmax_in_place(row)) S.flags |= kNumericalUnderflow;
      floor_row(row);
    }
  } else {
    auto row = S.p_u.row(0);
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t st = 0; st < nst_; ++st)
      for (std::size_t u = 0; u < nu_; ++u) row[u] += G[st * nu_ + u];
    if (softmax_in_place(row)) S.flags |= kNumericalUnderflow;
    floor_row(row);
  }
}

void P2PSolver::pv_step(SolverState& S, Terms& t) const {
  const std::size_t nv = S.nv();
  if (nv == 1) return;
  const auto& A = t.A;
  const double log_floor = std::log(kProbFloor);
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u = 0; u < nu_; ++u)
      for (std::size_t y = 0; y < ny_; ++y) {
        const std::size_t r = (st * nu_ + u) * ny_ + y;
        auto row = S.p_v.row(r);
        double* lp = &t.lpv[r * nv];
        const double m = m_[r];
        double mx = -INFINITY;
        if (m > 0.0)
          for (std::size_t v = 0; v < nv; ++v) {
            lp[v] = A[r * nv + v] / m;
            mx = std::max(mx, lp[v]);
          }
        if (!std::isfinite(mx)) {
          if (m > 0.0) S.flags |= kNumericalUnderflow;
          std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(nv));
          std::fill(lp, lp + nv, -std::log(static_cast<double>(nv)));
          continue;
        }
        // softmax that also hands back exact logs, so no log() per entry later
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

std::vector<double> P2PSolver::estimator_costs(const SolverState& S) const {
  std::vector<double> a;
  estimator_costs(S, a);
  return a;
}

void P2PSolver::estimator_costs(const SolverState& S, std::vector<double>& a) const {
  const std::size_t nv = S.nv();
  const auto& pu = S.p_u.data();
  const auto& pv = S.p_v.data();
  const auto& phi = eff_.spec().feedback_map;
  a.assign(nu_ * nv * nz_ * nshat_, 0.0);
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u = 0; u < nu_; ++u) {
      const double p = pu[prior_row(st) * nu_ + u];
      const double* w = &w_[(st * nu_ + u) * nz_];
      const double* dm = &dm_[(st * nu_ + u) * nz_ * nshat_];
      for (std::size_t z = 0; z < nz_; ++z) {
        if (w[z] == 0.0) continue;
        const double* v_row = &pv[((st * nu_ + u) * ny_ + phi[z]) * nv];
        for (std::size_t v = 0; v < nv; ++v) {
          const double f = p * v_row[v];
          double* out = &a[((u * nv + v) * nz_ + z) * nshat_];
          for (std::size_t k = 0; k < nshat_; ++k) out[k] += f * dm[z * nshat_ + k];
        }
      }
    }
}

std::size_t P2PSolver::update_estimator(SolverState& S) const {
  Terms t;
  return estimator_step(S, t);
}

std::size_t P2PSolver::estimator_step(SolverState& S, Terms& t) const {
  estimator_costs(S, t.a);
  const auto& a = t.a;
  std::size_t moved = 0;
  for (std::size_t r = 0; r < S.est.rows(); ++r) {
    std::span<const double> ar(a.data() + r * nshat_, nshat_);
    if (proximal_min_step(S.est.row(r), ar, S.schedule, S.iteration)) ++moved;
  }
  return moved;
}

double P2PSolver::L_of(const SolverState& S, const Terms& t) const {
  const std::size_t nv = S.nv();
  const auto& A = t.A;
  const auto& pu = S.p_u.data();
  const auto& pv = S.p_v.data();
  double L = 0.0;
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u = 0; u < nu_; ++u) {
      const double p = pu[prior_row(st) * nu_ + u];
      const double lpu = std::log(p);
      double inner = 0.0;
      for (std::size_t y = 0; y < ny_; ++y) {
        const std::size_t r = (st * nu_ + u) * ny_ + y;
        const double m = m_[r];
        if (m == 0.0) continue;
        for (std::size_t v = 0; v < nv; ++v)
          inner += pv[r * nv + v] * (A[r * nv + v] - m * (lpu + t.lpv[r * nv + v]));
      }
      L += p * inner;
    }
  return L;
}

double P2PSolver::B_of(const SolverState& S, const Terms& t) const {
  const std::size_t nv = S.nv();
  const auto& A = t.A;
  const auto& pu = S.p_u.data();

  // H[st][u] = sum_{y'} max_v K, K = A - m (log pU + log pV)
  std::vector<double> H(nst_ * nu_, 0.0);
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u = 0; u < nu_; ++u) {
      const double lpu = std::log(pu[prior_row(st) * nu_ + u]);
      double h = 0.0;
      for (std::size_t y = 0; y < ny_; ++y) {
        const std::size_t r = (st * nu_ + u) * ny_ + y;
        const double m = m_[r];
        if (m == 0.0) continue;
        double best = -INFINITY;
        for (std::size_t v = 0; v < nv; ++v)
          best = std::max(best, A[r * nv + v] - m * (lpu + t.lpv[r * nv + v]));
        h += best;
      }
      H[st * nu_ + u] = h;
    }

  double B = 0.0;
  if (nc_) {
    for (std::size_t st = 0; st < nst_; ++st) {
      if (c_[st] <= 0.0) continue;
      double best = -INFINITY;
      for (std::size_t u = 0; u < nu_; ++u) best = std::max(best, H[st * nu_ + u]);
      B += best;
    }
  } else {
    double best = -INFINITY;
    for (std::size_t u = 0; u < nu_; ++u) {
      double h = 0.0;
      for (std::size_t st = 0; st < nst_; ++st) h += H[st * nu_ + u];
      best = std::max(best, h);
    }
    B = best;
  }
  return B;
}

std::size_t P2PSolver::iterate(SolverState& S) const {
  Terms t = terms(S);
  return step(S, t);
}

std::size_t P2PSolver::step(SolverState& S, Terms& t) const {
  ++S.iteration;
  // A depends only on the posteriors and the estimator, so both prior blocks share it
  pu_step(S, t);
  pv_step(S, t);
  const std::size_t moved = estimator_step(S, t);
  update_posteriors(S);
  linear_terms(S, t);
  S.L = L_of(S, t);
  S.B = B_of(S, t);
  return moved;
}

JointTensor P2PSolver::joint(const SolverState& S) const {
  const std::size_t nv = S.nv();
  check_tensor_size(static_cast<double>(nst_) * nu_ * nz_ * nv, "p2p joint");
  const auto& phi = eff_.spec().feedback_map;
  std::vector<double> vals(nst_ * nu_ * nz_ * nv, 0.0);
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u = 0; u < nu_; ++u) {
      const double p = S.p_u(prior_row(st), u);
      for (std::size_t z = 0; z < nz_; ++z) {
        const double pw = p * w_[(st * nu_ + u) * nz_ + z];
        if (pw == 0.0) continue;
        auto v_row = S.p_v.row((st * nu_ + u) * ny_ + phi[z]);
        for (std::size_t v = 0; v < nv; ++v) vals[((st * nu_ + u) * nz_ + z) * nv + v] = pw * v_row[v];
      }
    }
  return JointTensor({"s_t", "u", "z", "v"}, {nst_, nu_, nz_, nv}, std::move(vals));
}

double P2PSolver::rate(const SolverState& S) const {
  const JointTensor j = joint(S);
  return mutual_information(j, {"u"}, {"z"}) - mutual_information(j, {"u"}, {"s_t"}) -
         conditional_mutual_information(j, {"v"}, {"s_t"}, {"u", "z"});
}

double P2PSolver::distortion(const SolverState& S) const {
  const std::size_t nv = S.nv();
  const auto E = expected_costs(S);
  const auto& pv = S.p_v.data();
  const auto& phi = eff_.spec().feedback_map;
  double D = 0.0;
  for (std::size_t st = 0; st < nst_; ++st)
    for (std::size_t u = 0; u < nu_; ++u) {
      const double p = S.p_u(prior_row(st), u);
      for (std::size_t z = 0; z < nz_; ++z) {
        const double* v_row = &pv[((st * nu_ + u) * ny_ + phi[z]) * nv];
        for (std::size_t v = 0; v < nv; ++v) D += p * v_row[v] * E[((st * nu_ + u) * nv + v) * nz_ + z];
      }
    }
  return D;
}

CDPoint P2PSolver::point(const SolverState& S) const {
  CDPoint pt;
  pt.rho = S.rho;
  pt.rate = rate(S);
  pt.distortion = distortion(S);
  pt.iterations = S.iteration;
  pt.L = S.L;
  pt.B = S.B;
  pt.gap = S.B - S.L;
  pt.mode = eff_.mode;
  pt.flags = S.flags | (eff_.truncated ? kStrategyTruncated : kNoFlags);
  return pt;
}

SolveResult P2PSolver::solve(const SolveOptions& opt) const {
  return solve(opt, init_state(opt.rho, opt.seed, opt.schedule, opt.v_size));
}

SolveResult P2PSolver::solve(const SolveOptions& opt, SolverState start) const {
  if (!(opt.delta > 0.0)) throw ConfigError("delta must be > 0");
  if (!(opt.rho >= 0.0)) throw ConfigError("rho must be >= 0");
  SolveResult res;
  res.state = std::move(start);
  SolverState& S = res.state;
  if (S.rho != opt.rho || S.iteration != 0) {
    S.rho = opt.rho;
    S.iteration = 0;
    S.flags = kNoFlags;
    S.schedule = opt.schedule;
    update_posteriors(S);
    S.L = compute_L(S);
    S.B = compute_B(S);
  }
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

}  // namespace cdtrade
