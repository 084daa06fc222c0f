#include "cdtrade/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "cdtrade/errors.hpp"

namespace cdtrade::oracle {

namespace {

double klog(double p, double q) { return p > 0.0 ? p * std::log(p / q) : 0.0; }

}  // namespace

Kernel kernel_rows(const CondDist& w) {
  Kernel k(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) k[r].assign(w.row(r).begin(), w.row(r).end());
  return k;
}

BAResult ba_capacity(const Kernel& w, double delta, std::size_t max_iters) {
  const std::size_t nx = w.size();
  if (nx == 0) throw ValidationError("ba_capacity: empty kernel");
  const std::size_t nz = w[0].size();
  BAResult res;
  std::vector<double> p(nx, 1.0 / static_cast<double>(nx)), q(nz), D(nx);
  for (std::size_t it = 0; it < max_iters; ++it) {
    std::fill(q.begin(), q.end(), 0.0);
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t z = 0; z < nz; ++z) q[z] += p[x] * w[x][z];
    double lower = 0.0, upper = -INFINITY;
    for (std::size_t x = 0; x < nx; ++x) {
      double d = 0.0;
      for (std::size_t z = 0; z < nz; ++z) d += klog(w[x][z], q[z]);
      D[x] = d;
      lower += p[x] * d;
      upper = std::max(upper, d);
    }
    res.lower = lower;
    res.upper = upper;
    res.iterations = it + 1;
    if (upper - lower <= delta) break;
    double s = 0.0;
    for (std::size_t x = 0; x < nx; ++x) {
      p[x] *= std::exp(D[x] - upper);
      s += p[x];
    }
    for (double& v : p) v /= s;
  }
  res.capacity = res.lower;
  res.p_x = p;
  return res;
}

BAResult ba_capacity_given_state(const std::vector<Kernel>& kernels, const std::vector<double>& p_s,
                                 double delta, std::size_t max_iters) {
  // X independent of S, so sum_s P(s) I(X;Y|S=s) = I(X; Y,S): one composite kernel.
  const std::size_t ns = kernels.size();
  if (ns == 0 || p_s.size() != ns) throw ValidationError("ba_capacity_given_state: shape mismatch");
  const std::size_t nx = kernels[0].size(), ny = kernels[0][0].size();
  Kernel comp(nx, std::vector<double>(ny * ns));
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t s = 0; s < ns; ++s)
      for (std::size_t y = 0; y < ny; ++y) comp[x][y * ns + s] = p_s[s] * kernels[s][x][y];
  return ba_capacity(comp, delta, max_iters);
}

std::vector<std::size_t> brute_force_estimator(const std::vector<std::vector<double>>& joint,
                                               const Matrix& d) {
  const std::size_t ns = joint.size();
  if (ns != d.rows) throw ValidationError("brute_force_estimator: |S| mismatch");
  const std::size_t nctx = ns ? joint[0].size() : 0;
  std::vector<std::size_t> out(nctx, 0);
  for (std::size_t c = 0; c < nctx; ++c) {
    double best = INFINITY;
    for (std::size_t k = 0; k < d.cols; ++k) {
      double cost = 0.0;
      for (std::size_t s = 0; s < ns; ++s) cost += joint[s][c] * d(s, k);
      if (cost < best) {
        best = cost;
        out[c] = k;
      }
    }
  }
  return out;
}

MinDistortion min_distortion_deterministic_x(const ChannelSpec& spec) {
  if (spec.sizes.s_t != 1) throw ModeViolation("min_distortion_deterministic_x: needs |S_T| = 1");
  const auto& n = spec.sizes;
  MinDistortion res;
  res.per_x.assign(n.x, 0.0);
  for (std::size_t x = 0; x < n.x; ++x) {
    std::vector<std::vector<double>> joint(n.s, std::vector<double>(n.z));
    for (std::size_t s = 0; s < n.s; ++s)
      for (std::size_t z = 0; z < n.z; ++z) joint[s][z] = spec.p_s[s] * spec.p_z_given_xs(x * n.s + s, z);
    auto h = brute_force_estimator(joint, spec.distortion);
    double D = 0.0;
    for (std::size_t z = 0; z < n.z; ++z)
      for (std::size_t s = 0; s < n.s; ++s) D += joint[s][z] * spec.distortion(s, h[z]);
    res.per_x[x] = D;
  }
  res.x = static_cast<std::size_t>(std::min_element(res.per_x.begin(), res.per_x.end()) - res.per_x.begin());
  res.value = res.per_x[res.x];
  return res;
}

// ---------------------------------------------------------------------------
// Full-joint evaluation of the Lagrangian and its partial derivatives.

namespace {

struct Dims {
  std::size_t ns, nst, nu, nz, ny, nv, nsh;
  bool nc;
};

Dims dims_of(const EffectiveChannel& eff, const SolverState& st) {
  const auto& n = eff.spec().sizes;
  return {n.s, n.s_t, eff.mapping_table.size(), n.z, n.y_fb, st.p_v.cols(), n.s_hat,
          eff.mode == CausalityMode::NonCausal};
}

// Calls fn(s, st, u, z, v, joint_mass, index set) for every positive-mass cell.
struct Cell {
  std::size_t iu, iv, iqu, iqv, iest;  // offsets into block data
};

template <class Fn>
void for_each_cell(const EffectiveChannel& eff, const SolverState& S, const Dims& d, Fn&& fn) {
  const ChannelSpec& spec = eff.spec();
  for (std::size_t s = 0; s < d.ns; ++s)
    for (std::size_t st = 0; st < d.nst; ++st) {
      const double pss = spec.p_s[s] * spec.p_st_given_s(s, st);
      if (pss == 0.0) continue;
      for (std::size_t u = 0; u < d.nu; ++u) {
        const std::size_t x = eff.mapping_table[u][st];
        const std::size_t iu = (d.nc ? st : 0) * d.nu + u;
        const double pu = S.p_u.data()[iu];
        for (std::size_t z = 0; z < d.nz; ++z) {
          const double wz = spec.p_z_given_xs(x * d.ns + s, z);
          if (wz == 0.0) continue;
          const std::size_t y = spec.feedback_map[z];
          for (std::size_t v = 0; v < d.nv; ++v) {
            const std::size_t iv = ((st * d.nu + u) * d.ny + y) * d.nv + v;
            const double base = pss * wz;  // mass excluding the two prior blocks
            Cell c{iu, iv, z * d.nu + u, (u * d.nz + z) * d.nv + v, ((u * d.nv + v) * d.nz + z) * d.nsh};
            fn(s, base, pu, S.p_v.data()[iv], c);
          }
        }
      }
    }
}

double cell_log_ratio(const SolverState& S, const Cell& c) {
  return std::log(S.q_u.data()[c.iqu]) + std::log(S.q_v.data()[c.iqv]) - std::log(S.p_u.data()[c.iu]) -
         std::log(S.p_v.data()[c.iv]);
}

double cell_cost(const SolverState& S, const Matrix& dist, std::size_t s, const Cell& c, std::size_t nsh) {
  double e = 0.0;
  for (std::size_t k = 0; k < nsh; ++k) e += S.est.data()[c.iest + k] * dist(s, k);
  return e;
}

}  // namespace

double lagrangian(const EffectiveChannel& eff, const SolverState& S) {
  const Dims d = dims_of(eff, S);
  const Matrix& dist = eff.spec().distortion;
  double L = 0.0;
  for_each_cell(eff, S, d, [&](std::size_t s, double base, double pu, double pv, const Cell& c) {
    const double mass = base * pu * pv;
    if (mass == 0.0) return;
    L += mass * (cell_log_ratio(S, c) - S.rho * cell_cost(S, dist, s, c, d.nsh));
  });
  return L;
}

Gradient lagrangian_gradient(const EffectiveChannel& eff, const SolverState& S) {
  const Dims d = dims_of(eff, S);
  const Matrix& dist = eff.spec().distortion;
  Gradient g;
  g.p_u.assign(S.p_u.data().size(), 0.0);
  g.p_v.assign(S.p_v.data().size(), 0.0);
  g.q_u.assign(S.q_u.data().size(), 0.0);
  g.q_v.assign(S.q_v.data().size(), 0.0);
  g.est.assign(S.est.data().size(), 0.0);
  for_each_cell(eff, S, d, [&](std::size_t s, double base, double pu, double pv, const Cell& c) {
    const double ell = cell_log_ratio(S, c) - S.rho * cell_cost(S, dist, s, c, d.nsh);
    // d/dx [x * f * (ell(x))] where ell contains -log x
    g.p_u[c.iu] += base * pv * (ell - 1.0);
    g.p_v[c.iv] += base * pu * (ell - 1.0);
    const double mass = base * pu * pv;
    g.q_u[c.iqu] += mass / S.q_u.data()[c.iqu];
    g.q_v[c.iqv] += mass / S.q_v.data()[c.iqv];
    for (std::size_t k = 0; k < d.nsh; ++k) g.est[c.iest + k] -= S.rho * mass * dist(s, k);
  });
  return g;
}

namespace {

BlockResidual block_residual(const std::string& name, const std::vector<double>& x,
                             const std::vector<double>& grad, std::size_t cols, double support) {
  BlockResidual br{name, 0.0, 0};
  for (std::size_t r = 0; r * cols < x.size(); ++r) {
    double cmax = -INFINITY, cmin = INFINITY;
    for (std::size_t k = 0; k < cols; ++k)
      if (x[r * cols + k] > support) {
        cmax = std::max(cmax, grad[r * cols + k]);
        cmin = std::min(cmin, grad[r * cols + k]);
      }
    if (!std::isfinite(cmax)) continue;
    double res = cmax - cmin;
    for (std::size_t k = 0; k < cols; ++k)
      if (x[r * cols + k] <= support) res = std::max(res, grad[r * cols + k] - cmax);
    if (res > br.residual) {
      br.residual = res;
      br.worst_row = r;
    }
  }
  return br;
}

}  // namespace

StationarityCertificate stationarity_certificate(const EffectiveChannel& eff, const SolverState& S,
                                                 double support, std::size_t fd_samples) {
  StationarityCertificate cert;
  const Gradient g = lagrangian_gradient(eff, S);
  cert.blocks.push_back(block_residual("p_u", S.p_u.data(), g.p_u, S.p_u.cols(), support));
  cert.blocks.push_back(block_residual("p_v", S.p_v.data(), g.p_v, S.p_v.cols(), support));
  cert.blocks.push_back(block_residual("q_u", S.q_u.data(), g.q_u, S.q_u.cols(), support));
  cert.blocks.push_back(block_residual("q_v", S.q_v.data(), g.q_v, S.q_v.cols(), support));
  cert.blocks.push_back(block_residual("est", S.est.data(), g.est, S.est.cols(), support));
  for (const auto& b : cert.blocks) cert.residual = std::max(cert.residual, b.residual);

  if (fd_samples == 0) return cert;
  // Pick eligible entries spread evenly across all blocks.
  struct Entry {
    int block;
    std::size_t idx;
  };
  std::vector<Entry> eligible;
  const std::vector<double>* blocks[] = {&S.p_u.data(), &S.p_v.data(), &S.q_u.data(), &S.q_v.data(),
                                         &S.est.data()};
  const std::vector<double>* grads[] = {&g.p_u, &g.p_v, &g.q_u, &g.q_v, &g.est};
  for (int b = 0; b < 5; ++b)
    for (std::size_t i = 0; i < blocks[b]->size(); ++i)
      if ((*blocks[b])[i] >= 1e-5) eligible.push_back({b, i});
  const std::size_t stride = std::max<std::size_t>(1, eligible.size() / fd_samples);
  const double h = 1e-6;
  SolverState work = S;
  std::vector<double>* wblocks[] = {&work.p_u.data(), &work.p_v.data(), &work.q_u.data(), &work.q_v.data(),
                                    &work.est.data()};
  for (std::size_t e = 0; e < eligible.size() && cert.fd_checked < fd_samples; e += stride) {
    auto [b, i] = eligible[e];
    double& x = (*wblocks[b])[i];
    const double x0 = x;
    x = x0 + h;
    const double up = lagrangian(eff, work);
    x = x0 - h;
    const double dn = lagrangian(eff, work);
    x = x0;
    const double fd = (up - dn) / (2 * h);
    const double an = (*grads[b])[i];
    cert.fd_max_rel_error = std::max(cert.fd_max_rel_error, std::abs(fd - an) / std::max(1.0, std::abs(an)));
    ++cert.fd_checked;
  }
  return cert;
}

std::vector<std::vector<double>> joint_s_given_context(const EffectiveChannel& eff, const SolverState& S) {
  const Dims d = dims_of(eff, S);
  std::vector<std::vector<double>> joint(d.ns, std::vector<double>(d.nu * d.nv * d.nz, 0.0));
  for_each_cell(eff, S, d, [&](std::size_t s, double base, double pu, double pv, const Cell& c) {
    joint[s][c.iest / d.nsh] += base * pu * pv;
  });
  return joint;
}

// ---------------------------------------------------------------------------

namespace {

// All compositions of n into k nonnegative parts, as probability vectors.
std::vector<std::vector<double>> simplex_grid(std::size_t k, std::size_t n) {
  std::vector<std::vector<double>> out;
  std::vector<std::size_t> parts(k, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t left) {
    if (pos + 1 == k) {
      parts[pos] = left;
      std::vector<double> p(k);
      for (std::size_t i = 0; i < k; ++i) p[i] = static_cast<double>(parts[i]) / static_cast<double>(n);
      out.push_back(std::move(p));
      return;
    }
    for (std::size_t a = 0; a <= left; ++a) {
      parts[pos] = a;
      rec(pos + 1, left - a);
    }
  };
  rec(0, n);
  return out;
}

double binom(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

}  // namespace

GridResult exhaustive_small_solver(const EffectiveChannel& eff, double rho, std::size_t resolution,
                                   std::size_t v_size, std::size_t max_points) {
  const ChannelSpec& spec = eff.spec();
  const auto& n = spec.sizes;
  const std::size_t nu = eff.mapping_table.size(), nv = v_size, nst = n.s_t, ny = n.y_fb;
  const bool nc = eff.mode == CausalityMode::NonCausal;
  const std::size_t ru = nc ? nst : 1, rv = nst * nu * ny;
  const std::size_t dim = ru * (nu - 1) + rv * (nv - 1);
  if (dim > 6) throw TooLarge("exhaustive_small_solver: free dimension " + std::to_string(dim) + " > 6");
  double count = std::pow(binom(resolution + nu - 1, nu - 1), static_cast<double>(ru)) *
                 std::pow(binom(resolution + nv - 1, nv - 1), static_cast<double>(rv));
  if (count > static_cast<double>(max_points))
    throw TooLarge("exhaustive_small_solver: grid of " + std::to_string(count) + " points");

  const auto gu = simplex_grid(nu, resolution);
  const auto gv = simplex_grid(nv, resolution);
  const std::size_t nrows = ru + rv;
  std::vector<std::size_t> idx(nrows, 0);
  GridResult best;
  best.best_L = -INFINITY;

  std::vector<double> puz(nu * n.z), puzv(nu * n.z * nv), pz(n.z), a(nu * nv * n.z * n.s_hat);
  for (;;) {
    auto pu_of = [&](std::size_t st, std::size_t u) { return gu[idx[nc ? st : 0]][u]; };
    auto pv_of = [&](std::size_t st, std::size_t u, std::size_t y, std::size_t v) {
      return gv[idx[ru + (st * nu + u) * ny + y]][v];
    };
    std::fill(puz.begin(), puz.end(), 0.0);
    std::fill(puzv.begin(), puzv.end(), 0.0);
    std::fill(pz.begin(), pz.end(), 0.0);
    std::fill(a.begin(), a.end(), 0.0);
    // first pass: marginals and estimator costs
    for (std::size_t s = 0; s < n.s; ++s)
      for (std::size_t st = 0; st < nst; ++st) {
        const double pss = spec.p_s[s] * spec.p_st_given_s(s, st);
        for (std::size_t u = 0; u < nu; ++u) {
          const double pu = pu_of(st, u);
          if (pss * pu == 0.0) continue;
          const std::size_t x = eff.mapping_table[u][st];
          for (std::size_t z = 0; z < n.z; ++z) {
            const double m = pss * pu * spec.p_z_given_xs(x * n.s + s, z);
            if (m == 0.0) continue;
            for (std::size_t v = 0; v < nv; ++v) {
              const double mv = m * pv_of(st, u, spec.feedback_map[z], v);
              puzv[(u * n.z + z) * nv + v] += mv;
              for (std::size_t k = 0; k < n.s_hat; ++k)
                a[((u * nv + v) * n.z + z) * n.s_hat + k] += mv * spec.distortion(s, k);
            }
            puz[u * n.z + z] += m;
            pz[z] += m;
          }
        }
      }
    // second pass: information part with exact posteriors
    double info = 0.0;
    for (std::size_t s = 0; s < n.s; ++s)
      for (std::size_t st = 0; st < nst; ++st) {
        const double pss = spec.p_s[s] * spec.p_st_given_s(s, st);
        for (std::size_t u = 0; u < nu; ++u) {
          const double pu = pu_of(st, u);
          if (pss * pu == 0.0) continue;
          const std::size_t x = eff.mapping_table[u][st];
          for (std::size_t z = 0; z < n.z; ++z) {
            const double m = pss * pu * spec.p_z_given_xs(x * n.s + s, z);
            if (m == 0.0) continue;
            for (std::size_t v = 0; v < nv; ++v) {
              const double pv = pv_of(st, u, spec.feedback_map[z], v);
              if (pv == 0.0) continue;
              const double qu = puz[u * n.z + z] / pz[z];
              const double qv = puzv[(u * n.z + z) * nv + v] / puz[u * n.z + z];
              info += m * pv * std::log(qu * qv / (pu * pv));
            }
          }
        }
      }
    double dist = 0.0;
    for (std::size_t c = 0; c < nu * nv * n.z; ++c) {
      double lo = INFINITY;
      for (std::size_t k = 0; k < n.s_hat; ++k) lo = std::min(lo, a[c * n.s_hat + k]);
      dist += lo;
    }
    const double L = info - rho * dist;
    ++best.points;
    if (L > best.best_L) {
      best.best_L = L;
      best.best_p_u.clear();
      for (std::size_t r = 0; r < ru; ++r) best.best_p_u.insert(best.best_p_u.end(), gu[idx[r]].begin(), gu[idx[r]].end());
      best.best_p_v.clear();
      for (std::size_t r = 0; r < rv; ++r)
        best.best_p_v.insert(best.best_p_v.end(), gv[idx[ru + r]].begin(), gv[idx[ru + r]].end());
    }
    // advance the mixed-radix counter
    std::size_t r = 0;
    for (; r < nrows; ++r) {
      const std::size_t lim = r < ru ? gu.size() : gv.size();
      if (++idx[r] < lim) break;
      idx[r] = 0;
    }
    if (r == nrows) break;
  }
  return best;
}

}  // namespace cdtrade::oracle
