#include "cdtrade/channel.hpp"

#include <cmath>

#include "cdtrade/errors.hpp"

namespace cdtrade {

std::string to_string(CausalityMode m) {
  switch (m) {
    case CausalityMode::StrictlyCausal: return "sc";
    case CausalityMode::Causal: return "c";
    case CausalityMode::NonCausal: return "nc";
  }
  return "?";
}

CausalityMode parse_mode(const std::string& s) {
  if (s == "sc" || s == "strictly-causal" || s == "StrictlyCausal") return CausalityMode::StrictlyCausal;
  if (s == "c" || s == "causal" || s == "Causal") return CausalityMode::Causal;
  if (s == "nc" || s == "noncausal" || s == "non-causal" || s == "NonCausal")
    return CausalityMode::NonCausal;
  throw ConfigError("unknown causality mode '" + s + "' (expected sc, c or nc)");
}

namespace {

constexpr double kKernelTol = 1e-9;

void check_kernel(const CondDist& k, std::size_t rows, std::size_t cols, const std::string& what) {
  if (k.rows() != rows || k.cols() != cols)
    throw ValidationError(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                          ", got " + std::to_string(k.rows()) + "x" + std::to_string(k.cols()));
  k.validate(kKernelTol, what);
}

void check_feedback(const std::vector<std::size_t>& phi, std::size_t nz, std::size_t ny) {
  if (phi.size() != nz)
    throw ValidationError("feedback_map: must be total (one entry per output symbol)");
  std::vector<bool> hit(ny, false);
  for (auto y : phi) {
    if (y >= ny) throw ValidationError("feedback_map: index out of range of |Y'|");
    hit[y] = true;
  }
  for (bool h : hit)
    if (!h) throw ValidationError("feedback_map: Y' is not the image of the map (relabel to be surjective)");
}

void check_distortion(const Matrix& d, std::size_t ns, std::size_t nshat) {
  if (d.rows != ns || d.cols != nshat) throw ValidationError("distortion: shape must be |S| x |S_hat|");
  for (double x : d.data)
    if (!std::isfinite(x) || x < 0) throw ValidationError("distortion: entries must be finite and >= 0");
}

void check_sizes_nonzero(std::initializer_list<std::size_t> sizes) {
  for (auto n : sizes)
    if (n == 0) throw ValidationError("sizes: every alphabet must be nonempty");
}

}  // namespace

void ChannelSpec::validate() const {
  const auto& n = sizes;
  check_sizes_nonzero({n.s, n.s_t, n.x, n.z, n.s_hat, n.y_fb});
  if (p_s.size() != n.s) throw ValidationError("p_S: length must be |S|");
  check_kernel(p_st_given_s, n.s, n.s_t, "p_ST_given_S");
  check_kernel(p_z_given_xs, n.x * n.s, n.z, "p_Z_given_XS");
  check_feedback(feedback_map, n.z, n.y_fb);
  check_distortion(distortion, n.s, n.s_hat);
}

void BCChannelSpec::validate() const {
  const auto& n = sizes;
  check_sizes_nonzero({n.s, n.s_t, n.x, n.z1, n.z2, n.s_hat, n.y_fb});
  if (p_s.size() != n.s) throw ValidationError("p_S: length must be |S|");
  check_kernel(p_st_given_s, n.s, n.s_t, "p_ST_given_S");
  check_kernel(p_z1z2_given_xs, n.x * n.s, n.z1 * n.z2, "p_Z1Z2_given_XS");
  check_feedback(feedback_map, n.z1, n.y_fb);
  check_distortion(distortion, n.s, n.s_hat);
}

ChannelSpec BCChannelSpec::receiver1() const {
  ChannelSpec out;
  out.sizes = {sizes.s, sizes.s_t, sizes.x, sizes.z1, sizes.s_hat, sizes.y_fb};
  out.p_s = p_s;
  out.p_st_given_s = p_st_given_s;
  std::vector<double> k(sizes.x * sizes.s * sizes.z1, 0.0);
  for (std::size_t r = 0; r < sizes.x * sizes.s; ++r)
    for (std::size_t z1 = 0; z1 < sizes.z1; ++z1)
      for (std::size_t z2 = 0; z2 < sizes.z2; ++z2)
        k[r * sizes.z1 + z1] += p_z1z2_given_xs(r, z1 * sizes.z2 + z2);
  out.p_z_given_xs = CondDist({"x", "s"}, {sizes.x, sizes.s}, "z", sizes.z1, std::move(k));
  out.feedback_map = feedback_map;
  out.distortion = distortion;
  out.labels = labels;
  out.seed = seed;
  return out;
}

CondDist BCChannelSpec::p_z2_given_xs() const {
  std::vector<double> k(sizes.x * sizes.s * sizes.z2, 0.0);
  for (std::size_t r = 0; r < sizes.x * sizes.s; ++r)
    for (std::size_t z1 = 0; z1 < sizes.z1; ++z1)
      for (std::size_t z2 = 0; z2 < sizes.z2; ++z2)
        k[r * sizes.z2 + z2] += p_z1z2_given_xs(r, z1 * sizes.z2 + z2);
  return CondDist({"x", "s"}, {sizes.x, sizes.s}, "z2", sizes.z2, std::move(k));
}

std::vector<std::vector<std::size_t>> strategy_table(std::size_t nx, std::size_t nst,
                                                     CausalityMode mode, std::size_t cap,
                                                     bool allow_truncation, bool* truncated) {
  std::vector<std::vector<std::size_t>> table;
  if (truncated) *truncated = false;
  if (mode == CausalityMode::StrictlyCausal) {
    for (std::size_t x = 0; x < nx; ++x) table.emplace_back(nst, x);
    return table;
  }
  double count = std::pow(static_cast<double>(nx), static_cast<double>(nst));
  std::size_t take;
  if (count > static_cast<double>(cap)) {
    if (!allow_truncation)
      throw StrategyExplosion("Shannon strategy alphabet |X|^|S_T| = " + std::to_string(nx) + "^" +
                              std::to_string(nst) + " exceeds cap " + std::to_string(cap));
    take = cap;
    if (truncated) *truncated = true;
  } else {
    take = static_cast<std::size_t>(count);
  }
  table.reserve(take);
  for (std::size_t u = 0; u < take; ++u) {
    std::vector<std::size_t> map(nst);
    std::size_t rem = u;
    for (std::size_t k = 0; k < nst; ++k) {
      map[k] = rem % nx;
      rem /= nx;
    }
    table.push_back(std::move(map));
  }
  return table;
}

namespace {

CondDist expand_kernel(const CondDist& p_out_given_xs, const std::vector<std::vector<std::size_t>>& table,
                       std::size_t nst, std::size_t ns, const std::string& out_label) {
  const std::size_t nu = table.size(), nz = p_out_given_xs.cols();
  check_tensor_size(static_cast<double>(nu) * nst * ns * nz, "effective kernel");
  std::vector<double> k(nu * nst * ns * nz);
  for (std::size_t u = 0; u < nu; ++u)
    for (std::size_t st = 0; st < nst; ++st) {
      const std::size_t x = table[u][st];
      for (std::size_t s = 0; s < ns; ++s) {
        auto src = p_out_given_xs.row(x * ns + s);
        std::copy(src.begin(), src.end(), k.begin() + ((u * nst + st) * ns + s) * nz);
      }
    }
  return CondDist({"u", "s_t", "s"}, {nu, nst, ns}, out_label, nz, std::move(k));
}

}  // namespace

EffectiveChannel expand_shannon_strategy(const ChannelSpec& spec, CausalityMode mode,
                                         std::optional<std::size_t> cap, bool allow_truncation) {
  spec.validate();
  EffectiveChannel eff;
  eff.mode = mode;
  eff.mapping_table = strategy_table(spec.sizes.x, spec.sizes.s_t, mode,
                                     cap.value_or(kDefaultStrategyCap), allow_truncation,
                                     &eff.truncated);
  eff.p_z_given_u_st_s =
      expand_kernel(spec.p_z_given_xs, eff.mapping_table, spec.sizes.s_t, spec.sizes.s, "z");
  eff.origin = std::make_shared<const ChannelSpec>(spec);
  return eff;
}

BCEffectiveChannel expand_shannon_strategy(const BCChannelSpec& spec, CausalityMode mode,
                                           std::optional<std::size_t> cap, bool allow_truncation) {
  spec.validate();
  BCEffectiveChannel eff;
  eff.mode = mode;
  eff.mapping_table = strategy_table(spec.sizes.x, spec.sizes.s_t, mode,
                                     cap.value_or(kDefaultStrategyCap), allow_truncation,
                                     &eff.truncated);
  eff.p_z1z2_given_u_st_s = expand_kernel(spec.p_z1z2_given_xs, eff.mapping_table,
                                          spec.sizes.s_t, spec.sizes.s, "z1,z2");
  eff.origin = std::make_shared<const BCChannelSpec>(spec);
  return eff;
}

}  // namespace cdtrade
