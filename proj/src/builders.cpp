#include "cdtrade/builders.hpp"

#include <cmath>
#include <numbers>

#include "cdtrade/errors.hpp"
#include "cdtrade/rng.hpp"
#include "cdtrade/simplex.hpp"

namespace cdtrade {

std::vector<double> quant(double a, double b, std::size_t n) {
  if (!(a < b) || n == 0) throw ValidationError("quant: need a < b and N >= 1");
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k)
    out[k] = a + (b - a) * static_cast<double>(2 * k + 1) / static_cast<double>(2 * n);
  return out;
}

std::vector<double> samp(double a, double b, std::size_t n, std::uint64_t seed) {
  if (!(a <= b) || n == 0) throw ValidationError("samp: need a <= b and N >= 1");
  SplitMix64 rng(seed);
  std::vector<double> out(n);
  for (auto& x : out) x = a + (b - a) * rng.uniform();
  return out;
}

std::vector<CVec> samp(const CVec& a, const CVec& b, std::size_t n, std::uint64_t seed) {
  if (a.size() != b.size() || a.empty() || n == 0) throw ValidationError("samp: bad bounds or N");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i].real() <= b[i].real()) || !(a[i].imag() <= b[i].imag()))
      throw ValidationError("samp: need a <= b componentwise");
  SplitMix64 rng(seed);
  std::vector<CVec> out(n, CVec(a.size()));
  for (auto& pt : out)
    for (std::size_t i = 0; i < a.size(); ++i) {
      double re = a[i].real() + (b[i].real() - a[i].real()) * rng.uniform();
      double im = a[i].imag() + (b[i].imag() - a[i].imag()) * rng.uniform();
      pt[i] = {re, im};
    }
  return out;
}

CVec steering_vector(double theta, std::size_t n_r) {
  if (n_r == 0) throw ValidationError("steering_vector: N_R >= 1");
  CVec h(n_r);
  const double phase = std::numbers::pi * std::sin(theta);
  for (std::size_t k = 0; k < n_r; ++k) h[k] = std::polar(1.0, static_cast<double>(k) * phase);
  return h;
}

CVec psk(std::size_t m) {
  if (m < 2) throw ValidationError("psk: M >= 2");
  CVec out(m);
  for (std::size_t k = 0; k < m; ++k)
    out[k] = std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(m));
  return out;
}

AngleUnit parse_angle_unit(const std::string& s) {
  if (s == "deg" || s == "degrees" || s == "deg2") return AngleUnit::Degrees;
  if (s == "rad" || s == "radians" || s == "rad2") return AngleUnit::Radians;
  throw ConfigError("unknown angle unit '" + s + "' (expected deg or rad)");
}

std::string to_string(AngleUnit u) { return u == AngleUnit::Degrees ? "deg" : "rad"; }

namespace {

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
double in_unit(double deg, AngleUnit u) { return u == AngleUnit::Degrees ? deg : deg2rad(deg); }

double sq_dist(const CVec& a, const CVec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
  return s;
}

// Turn log-densities into a normalized row without underflowing the maximum.
void normalize_logs(std::vector<double>& row) { softmax_in_place(row); }

std::vector<double> gaussian_prior(const std::vector<double>& pts, double sigma) {
  std::vector<double> w(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) w[i] = -pts[i] * pts[i] / (2.0 * sigma * sigma);
  normalize_logs(w);
  return w;
}

CVec box(std::size_t dim, double b, double sign) { return CVec(dim, cplx(sign * b, sign * b)); }

CVec scalar_cloud(std::size_t n, double b, std::uint64_t seed) {
  auto pts = samp(box(1, b, -1), box(1, b, 1), n, seed);
  CVec out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = pts[i][0];
  return out;
}

void push_complex_labels(Labels& labels, const std::string& name, const CVec& pts) {
  auto& re = labels[name + "_re"];
  auto& im = labels[name + "_im"];
  for (auto c : pts) {
    re.push_back(c.real());
    im.push_back(c.imag());
  }
}

Matrix angle_distortion(const std::vector<double>& grid_deg, AngleUnit unit) {
  const std::size_t n = grid_deg.size();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double diff = in_unit(grid_deg[i], unit) - in_unit(grid_deg[j], unit);
      d(i, j) = diff * diff;
    }
  return d;
}

std::vector<std::size_t> feedback(bool on, std::size_t nz, std::size_t* ny) {
  std::vector<std::size_t> phi(nz, 0);
  if (on)
    for (std::size_t z = 0; z < nz; ++z) phi[z] = z;
  *ny = on ? nz : 1;
  return phi;
}

}  // namespace

ChannelSpec build_simo_channel(const SimoParams& p) {
  if (p.n_r == 0 || p.n_theta == 0 || p.n_y == 0 || p.x_points.empty() || !(p.sigma_n > 0) ||
      !(p.sigma_s > 0))
    throw ValidationError("build_simo_channel: sizes must be >= 1 and sigmas > 0");
  const auto theta_deg = quant(-90, 90, p.n_theta);
  const std::size_t ns = p.n_theta, nx = p.x_points.size(), ny = p.n_y;
  const bool has_st = p.sigma_st.has_value();
  const std::size_t nst = has_st ? p.n_st : 1;

  ChannelSpec spec;
  std::vector<double> theta_prior_unit(ns);
  for (std::size_t i = 0; i < ns; ++i) theta_prior_unit[i] = in_unit(theta_deg[i], p.prior_unit);
  spec.p_s = ProbVec(gaussian_prior(theta_prior_unit, p.sigma_s));

  std::vector<double> pst(ns * nst, 1.0);
  std::vector<double> st_deg;
  if (has_st) {
    st_deg = quant(-90, 90, nst);
    for (std::size_t s = 0; s < ns; ++s) {
      std::vector<double> row(nst);
      for (std::size_t t = 0; t < nst; ++t) {
        double diff = in_unit(st_deg[t], p.prior_unit) - theta_prior_unit[s];
        row[t] = -diff * diff / (2.0 * *p.sigma_st * *p.sigma_st);
      }
      normalize_logs(row);
      std::copy(row.begin(), row.end(), pst.begin() + s * nst);
    }
  }
  spec.p_st_given_s = CondDist({"s"}, {ns}, "s_t", nst, std::move(pst));

  const auto cloud = samp(box(p.n_r, p.y_box, -1), box(p.n_r, p.y_box, 1), ny, p.seed);
  const std::size_t nz = p.radar ? ny * nx : ny;
  std::vector<double> k(nx * ns * nz, 0.0);
  const double inv_var = 1.0 / (p.sigma_n * p.sigma_n);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t s = 0; s < ns; ++s) {
      CVec mean = steering_vector(deg2rad(theta_deg[s]), p.n_r);
      for (auto& m : mean) m *= p.x_points[x];
      std::vector<double> row(ny);
      for (std::size_t y = 0; y < ny; ++y) row[y] = -sq_dist(cloud[y], mean) * inv_var;
      normalize_logs(row);
      double* out = k.data() + (x * ns + s) * nz;
      for (std::size_t y = 0; y < ny; ++y) out[p.radar ? y * nx + x : y] = row[y];
    }
  spec.p_z_given_xs = CondDist({"x", "s"}, {nx, ns}, "z", nz, std::move(k));
  spec.feedback_map = feedback(p.feedback, nz, &spec.sizes.y_fb);
  spec.distortion = angle_distortion(theta_deg, p.distortion_unit);
  spec.sizes.s = ns;
  spec.sizes.s_t = nst;
  spec.sizes.x = nx;
  spec.sizes.z = nz;
  spec.sizes.s_hat = ns;
  spec.seed = p.seed;
  spec.labels["theta_deg"] = theta_deg;
  if (has_st) spec.labels["s_t_deg"] = st_deg;
  push_complex_labels(spec.labels, "x", p.x_points);
  spec.validate();
  return spec;
}

BCChannelSpec build_awgn_bc(const AwgnBcParams& p) {
  auto grid = [&](const std::optional<CVec>& given, std::size_t n, std::uint64_t idx) {
    return given ? *given : scalar_cloud(n, p.box, derive_seed(p.seed, idx));
  };
  const CVec s1 = grid(p.s1_grid, p.n_s1, 1), s2 = grid(p.s2_grid, p.n_s2, 2),
             st = grid(p.st_grid, p.n_st, 3), y1 = grid(p.y1_grid, p.n_y1, 4),
             y2 = grid(p.y2_grid, p.n_y2, 5);
  const std::size_t n1 = s1.size(), n2 = s2.size(), ns = n1 * n2, nst = st.size(),
                    nx = p.x_points.size(), ny1 = y1.size(), ny2 = y2.size();
  if (!ns || !nst || !nx || !ny1 || !ny2) throw ValidationError("build_awgn_bc: empty grid");

  BCChannelSpec spec;
  std::vector<double> ps(ns);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j)
      ps[i * n2 + j] = -std::norm(s1[i]) / (p.sigma_s1 * p.sigma_s1) -
                       std::norm(s2[j]) / (p.sigma_s2 * p.sigma_s2);
  normalize_logs(ps);
  spec.p_s = ProbVec(ps);

  std::vector<double> pst(ns * nst);
  for (std::size_t s = 0; s < ns; ++s) {
    std::vector<double> row(nst);
    for (std::size_t t = 0; t < nst; ++t)
      row[t] = -std::norm(st[t] - s1[s / n2]) / (p.sigma_st * p.sigma_st);
    normalize_logs(row);
    std::copy(row.begin(), row.end(), pst.begin() + s * nst);
  }
  spec.p_st_given_s = CondDist({"s"}, {ns}, "s_t", nst, std::move(pst));

  std::vector<double> k(nx * ns * ny1 * ny2);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t s = 0; s < ns; ++s) {
      const cplx a = s1[s / n2], b = s2[s % n2], xv = p.x_points[x];
      std::vector<double> r1(ny1), r2(ny2);
      for (std::size_t i = 0; i < ny1; ++i) r1[i] = -std::norm(y1[i] - xv - a) / (p.sigma_n1 * p.sigma_n1);
      for (std::size_t i = 0; i < ny2; ++i)
        r2[i] = -std::norm(y2[i] - xv - a - b) / (p.sigma_n2 * p.sigma_n2);
      normalize_logs(r1);
      normalize_logs(r2);
      double* out = k.data() + (x * ns + s) * ny1 * ny2;
      for (std::size_t i = 0; i < ny1; ++i)
        for (std::size_t j = 0; j < ny2; ++j) out[i * ny2 + j] = r1[i] * r2[j];
    }
  spec.p_z1z2_given_xs = CondDist({"x", "s"}, {nx, ns}, "z1,z2", ny1 * ny2, std::move(k));
  spec.feedback_map = feedback(p.feedback, ny1, &spec.sizes.y_fb);

  spec.distortion = Matrix(ns, n1);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t j = 0; j < n1; ++j) spec.distortion(s, j) = std::norm(s1[s / n2] - s1[j]);

  spec.sizes.s = ns;
  spec.sizes.s_t = nst;
  spec.sizes.x = nx;
  spec.sizes.z1 = ny1;
  spec.sizes.z2 = ny2;
  spec.sizes.s_hat = n1;
  spec.seed = p.seed;
  push_complex_labels(spec.labels, "s1", s1);
  push_complex_labels(spec.labels, "s2", s2);
  push_complex_labels(spec.labels, "s_t", st);
  push_complex_labels(spec.labels, "y1", y1);
  push_complex_labels(spec.labels, "y2", y2);
  push_complex_labels(spec.labels, "x", p.x_points);
  spec.validate();
  return spec;
}

BCChannelSpec build_isac_bc(const IsacParams& p) {
  if (p.n_r == 0 || p.n_theta == 0 || p.n_y1 == 0 || p.n_y2 == 0 || p.x_points.empty())
    throw ValidationError("build_isac_bc: sizes must be >= 1");
  const auto theta_deg = quant(-90, 90, p.n_theta);
  const std::size_t ns = p.n_theta, nx = p.x_points.size(), ny1 = p.n_y1, ny2 = p.n_y2;
  const std::size_t nz1 = ny1 * nx, nz2 = p.z2_includes_state ? ny2 * ns : ny2;
  const CVec h2 = p.h2.value_or(CVec(p.n_r, cplx(1.0, 0.0)));
  if (h2.size() != p.n_r) throw ValidationError("build_isac_bc: h2 must have length N_R");

  BCChannelSpec spec;
  std::vector<double> theta_prior_unit(ns);
  for (std::size_t i = 0; i < ns; ++i) theta_prior_unit[i] = in_unit(theta_deg[i], p.prior_unit);
  spec.p_s = ProbVec(gaussian_prior(theta_prior_unit, p.sigma_s));
  spec.p_st_given_s = CondDist({"s"}, {ns}, "s_t", 1, std::vector<double>(ns, 1.0));

  const auto c1 = samp(box(p.n_r, p.y_box, -1), box(p.n_r, p.y_box, 1), ny1, derive_seed(p.seed, 1));
  const auto c2 = samp(box(p.n_r, p.y_box, -1), box(p.n_r, p.y_box, 1), ny2, derive_seed(p.seed, 2));

  std::vector<double> k(nx * ns * nz1 * nz2, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t s = 0; s < ns; ++s) {
      const CVec h1 = steering_vector(deg2rad(theta_deg[s]), p.n_r);
      const CVec& hb = p.h2_follows_angle ? h1 : h2;
      CVec m1(p.n_r), m2(p.n_r);
      for (std::size_t i = 0; i < p.n_r; ++i) {
        m1[i] = h1[i] * p.x_points[x];
        m2[i] = hb[i] * p.x_points[x];
      }
      std::vector<double> r1(ny1), r2(ny2);
      for (std::size_t y = 0; y < ny1; ++y) r1[y] = -sq_dist(c1[y], m1) / (p.sigma_n1 * p.sigma_n1);
      for (std::size_t y = 0; y < ny2; ++y) r2[y] = -sq_dist(c2[y], m2) / (p.sigma_n2 * p.sigma_n2);
      normalize_logs(r1);
      normalize_logs(r2);
      double* out = k.data() + (x * ns + s) * nz1 * nz2;
      for (std::size_t y1 = 0; y1 < ny1; ++y1) {
        const std::size_t z1 = y1 * nx + x;
        for (std::size_t y2 = 0; y2 < ny2; ++y2) {
          const std::size_t z2 = p.z2_includes_state ? y2 * ns + s : y2;
          out[z1 * nz2 + z2] = r1[y1] * r2[y2];
        }
      }
    }
  spec.p_z1z2_given_xs = CondDist({"x", "s"}, {nx, ns}, "z1,z2", nz1 * nz2, std::move(k));
  spec.feedback_map = feedback(p.feedback, nz1, &spec.sizes.y_fb);
  spec.distortion = angle_distortion(theta_deg, p.distortion_unit);
  spec.sizes.s = ns;
  spec.sizes.s_t = 1;
  spec.sizes.x = nx;
  spec.sizes.z1 = nz1;
  spec.sizes.z2 = nz2;
  spec.sizes.s_hat = ns;
  spec.seed = p.seed;
  spec.labels["theta_deg"] = theta_deg;
  push_complex_labels(spec.labels, "x", p.x_points);
  spec.validate();
  return spec;
}

ChannelSpec build_bsc(double crossover) {
  if (!(crossover >= 0.0 && crossover <= 1.0)) throw ValidationError("bsc: crossover must lie in [0, 1]");
  ChannelSpec spec;
  spec.sizes = {1, 1, 2, 2, 1, 1};
  spec.p_s = ProbVec({1.0});
  spec.p_st_given_s = CondDist({"s"}, {1}, "s_t", 1, {1.0});
  spec.p_z_given_xs = CondDist({"x", "s"}, {2, 1}, "z", 2,
                               {1.0 - crossover, crossover, crossover, 1.0 - crossover});
  spec.feedback_map = {0, 0};
  spec.distortion = Matrix(1, 1, 0.0);
  spec.validate();
  return spec;
}

}  // namespace cdtrade
