#include "cdtrade/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "cdtrade/builders.hpp"
#include "cdtrade/curve.hpp"
#include "cdtrade/entropy_report.hpp"
#include "cdtrade/errors.hpp"
#include "cdtrade/io.hpp"
#include "cdtrade/isac.hpp"
#include "cdtrade/oracle.hpp"
#include "cdtrade/parallel.hpp"
#include "cdtrade/rng.hpp"
#include "cdtrade/solver_bc.hpp"
#include "cdtrade/solver_p2p.hpp"

namespace fs = std::filesystem;

namespace cdtrade {

std::string to_string(Task t) {
  switch (t) {
    case Task::P2PCurve: return "p2p-curve";
    case Task::BCRegion: return "bc-region";
    case Task::IsacCurve: return "isac-curve";
    case Task::BuildChannel: return "build-channel";
    case Task::Verify: return "verify";
  }
  return "?";
}

Task parse_task(const std::string& s) {
  for (Task t : {Task::P2PCurve, Task::BCRegion, Task::IsacCurve, Task::BuildChannel, Task::Verify})
    if (to_string(t) == s) return t;
  throw ConfigError("task: unknown value '" + s + "'");
}

std::vector<double> parse_grid(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(what + ": cannot parse '" + s + "'");
    }
  };
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    if (item.empty()) continue;
    if (item.rfind("log:", 0) == 0) {
      std::vector<std::string> parts;
      std::stringstream ps(item.substr(4));
      std::string p;
      while (std::getline(ps, p, ':')) parts.push_back(p);
      if (parts.size() != 3) throw ConfigError(what + ": expected log:lo:hi:n, got '" + item + "'");
      const double lo = number(parts[0]), hi = number(parts[1]), n = number(parts[2]);
      if (!(lo > 0 && hi >= lo && n >= 1 && n == std::floor(n)))
        throw ConfigError(what + ": log range needs 0 < lo <= hi and integer n >= 1");
      auto g = log_grid(lo, hi, static_cast<std::size_t>(n));
      out.insert(out.end(), g.begin(), g.end());
    } else {
      out.push_back(number(item));
    }
  }
  if (out.empty()) throw ConfigError(what + ": grid is empty");
  return out;
}

namespace {

std::vector<double> grid_from_json(const json& v, const std::string& what) {
  if (v.is_string()) return parse_grid(v.get<std::string>(), what);
  if (v.is_number()) return {v.get<double>()};
  if (v.is_array()) {
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(what + "[" + std::to_string(i) + "]: expected a number");
      out.push_back(v[i].get<double>());
    }
    if (out.empty()) throw ConfigError(what + ": grid is empty");
    return out;
  }
  throw ConfigError(what + ": expected a number, an array or a grid string");
}

template <class T>
T typed(const json& v, const std::string& path) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + ": wrong type (" + std::string(v.type_name()) + ")");
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError(where + "." + k + ": unknown field");
}

// Reads j[key] into dst if present.
template <class T>
void opt_field(const json& j, const char* key, T& dst, const std::string& where) {
  if (auto it = j.find(key); it != j.end()) dst = typed<T>(*it, where + "." + key);
}

CVec psk_points(const json& j, const std::string& where, std::size_t def) {
  std::size_t m = def;
  opt_field(j, "psk", m, where);
  if (m == 0) throw ConfigError(where + ".psk: must be positive");
  return psk(m);
}

AngleUnit unit_field(const json& j, const char* key, AngleUnit def, const std::string& where) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      return parse_angle_unit(typed<std::string>(*it, where + "." + key));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(where + "." + key + ": " + e.what());
    }
  }
  return def;
}

SimoParams simo_params(const json& j, const std::string& w) {
  check_keys(j,
             {"n_r", "sigma_n", "sigma_s", "prior_unit", "sigma_st", "n_theta", "n_st", "n_y", "psk", "y_box",
              "seed", "feedback", "radar", "distortion_unit"},
             w);
  SimoParams p;
  opt_field(j, "n_r", p.n_r, w);
  opt_field(j, "sigma_n", p.sigma_n, w);
  opt_field(j, "sigma_s", p.sigma_s, w);
  p.prior_unit = unit_field(j, "prior_unit", p.prior_unit, w);
  if (auto it = j.find("sigma_st"); it != j.end())
    p.sigma_st = it->is_null() ? std::nullopt : std::optional<double>(typed<double>(*it, w + ".sigma_st"));
  opt_field(j, "n_theta", p.n_theta, w);
  opt_field(j, "n_st", p.n_st, w);
  opt_field(j, "n_y", p.n_y, w);
  p.x_points = psk_points(j, w, 4);
  opt_field(j, "y_box", p.y_box, w);
  opt_field(j, "seed", p.seed, w);
  opt_field(j, "feedback", p.feedback, w);
  opt_field(j, "radar", p.radar, w);
  p.distortion_unit = unit_field(j, "distortion_unit", p.distortion_unit, w);
  return p;
}

AwgnBcParams awgn_params(const json& j, const std::string& w) {
  check_keys(j,
             {"sigma_n1", "sigma_n2", "sigma_s1", "sigma_s2", "sigma_st", "n_s1", "n_s2", "n_st", "n_y1", "n_y2",
              "box", "psk", "seed", "feedback"},
             w);
  AwgnBcParams p;
  opt_field(j, "sigma_n1", p.sigma_n1, w);
  opt_field(j, "sigma_n2", p.sigma_n2, w);
  opt_field(j, "sigma_s1", p.sigma_s1, w);
  opt_field(j, "sigma_s2", p.sigma_s2, w);
  opt_field(j, "sigma_st", p.sigma_st, w);
  opt_field(j, "n_s1", p.n_s1, w);
  opt_field(j, "n_s2", p.n_s2, w);
  opt_field(j, "n_st", p.n_st, w);
  opt_field(j, "n_y1", p.n_y1, w);
  opt_field(j, "n_y2", p.n_y2, w);
  opt_field(j, "box", p.box, w);
  p.x_points = psk_points(j, w, 4);
  opt_field(j, "seed", p.seed, w);
  opt_field(j, "feedback", p.feedback, w);
  return p;
}

IsacParams isac_params(const json& j, const std::string& w) {
  check_keys(j,
             {"n_r", "sigma_n1", "sigma_n2", "sigma_s", "prior_unit", "n_theta", "n_y1", "n_y2", "psk",
              "h2_follows_angle", "z2_includes_state", "y_box", "seed", "feedback", "distortion_unit"},
             w);
  IsacParams p;
  opt_field(j, "n_r", p.n_r, w);
  opt_field(j, "sigma_n1", p.sigma_n1, w);
  opt_field(j, "sigma_n2", p.sigma_n2, w);
  opt_field(j, "sigma_s", p.sigma_s, w);
  p.prior_unit = unit_field(j, "prior_unit", p.prior_unit, w);
  opt_field(j, "n_theta", p.n_theta, w);
  opt_field(j, "n_y1", p.n_y1, w);
  opt_field(j, "n_y2", p.n_y2, w);
  p.x_points = psk_points(j, w, 8);
  opt_field(j, "h2_follows_angle", p.h2_follows_angle, w);
  opt_field(j, "z2_includes_state", p.z2_includes_state, w);
  opt_field(j, "y_box", p.y_box, w);
  opt_field(j, "seed", p.seed, w);
  opt_field(j, "feedback", p.feedback, w);
  p.distortion_unit = unit_field(j, "distortion_unit", p.distortion_unit, w);
  return p;
}

bool builder_is_bc(const std::string& b) { return b == "awgn-bc" || b == "isac"; }

void require_builder(const std::string& b) {
  if (b != "simo" && b != "bsc" && !builder_is_bc(b))
    throw ConfigError("channel.builder: unknown builder '" + b + "' (simo, bsc, awgn-bc, isac)");
}

std::string mode_name(CausalityMode m) {
  switch (m) {
    case CausalityMode::StrictlyCausal: return "sc";
    case CausalityMode::Causal: return "c";
    case CausalityMode::NonCausal: return "nc";
  }
  return "?";
}

std::string schedule_name(const ProximalSchedule& s) {
  return s.kind == ProximalSchedule::Kind::Decay ? "decay" : "constant";
}

bool source_is_bc(const ChannelSource& src) {
  if (!src.builder.empty()) return builder_is_bc(src.builder);
  return is_bc_channel_json(load_json(src.path));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json point_entry(std::size_t i, double rho, std::uint32_t flags, double seconds) {
  return json{{"index", i}, {"rho", rho}, {"flags", flags_to_string(flags)}, {"seconds", seconds}};
}

// Manifest echo, written once the first point has been attempted.
json manifest_base(const RunConfig& cfg) {
  return json{{"artifact_version", kArtifactVersion}, {"task", to_string(cfg.task)}, {"config", config_to_json(cfg)}};
}

int finish(const RunConfig& cfg, const json& manifest, bool any_max_iters, std::ostream& log) {
  save_json((fs::path(cfg.out) / "manifest.json").string(), manifest);
  if (any_max_iters) {
    log << "warning: at least one point stopped at the iteration cap\n";
    if (cfg.strict) return 3;
  }
  return 0;
}

int run_p2p(const RunConfig& cfg, std::ostream& log) {
  const ChannelSpec spec = build_p2p_channel(cfg.channel);
  const P2PSolver solver(expand_shannon_strategy(spec, cfg.mode));
  SweepOptions so;
  so.rhos = cfg.rhos.empty() ? default_rho_grid() : cfg.rhos;
  so.base.delta = cfg.delta.value_or(1e-3);
  so.base.seed = cfg.seed;
  so.base.schedule = cfg.schedule;
  if (cfg.max_iters) so.base.max_iters = *cfg.max_iters;
  so.base.keep_trace = false;
  so.restarts = cfg.restarts;
  so.jobs = cfg.jobs;
  const SweepResult res = sweep_curve(solver, so);

  fs::create_directories(fs::path(cfg.out) / "states");
  save_json((fs::path(cfg.out) / "channel.json").string(), channel_to_json(spec));
  std::string csv = p2p_csv_header(cfg.bits);
  json manifest = manifest_base(cfg);
  manifest["restarts"] = so.restarts ? so.restarts : default_restarts(solver.channel());
  manifest["points"] = json::array();
  bool capped = false;
  for (std::size_t i = 0; i < res.points.size(); ++i) {
    const SweepPoint& sp = res.points[i];
    csv += p2p_csv_row(sp.point, cfg.bits);
    const std::string state_file = "states/point_" + std::to_string(i) + ".json";
    save_json((fs::path(cfg.out) / state_file).string(), state_to_json(sp.state));
    const EntropyReport er = entropy_report(solver, sp.state);
    json e = point_entry(i, sp.point.rho, sp.point.flags, sp.seconds);
    e["state"] = state_file;
    e["restart_L"] = sp.restart_L;
    e["best_restart"] = sp.best_restart;
    e["H_U"] = er.h_u;
    e["H_X"] = er.h_x;
    e["near_deterministic"] = er.near_deterministic;
    manifest["points"].push_back(e);
    capped |= (sp.point.flags & kMaxIters) != 0;
  }
  write_text((fs::path(cfg.out) / "curve.csv").string(), csv);
  if (!res.shape.ok()) log << "warning: curve shape check reports " << res.shape.violations.size() << " violation(s)\n";
  manifest["shape_violations"] = res.shape.violations.size();
  log << "wrote " << res.points.size() << " points to " << (fs::path(cfg.out) / "curve.csv").string() << "\n";
  return finish(cfg, manifest, capped, log);
}

int run_bc(const RunConfig& cfg, std::ostream& log) {
  const BCChannelSpec spec = build_bc_channel(cfg.channel);
  const BCSolver solver(expand_shannon_strategy(spec, cfg.mode));
  RegionSweepOptions ro;
  ro.alphas = cfg.alphas.empty() ? std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0} : cfg.alphas;
  ro.rhos = cfg.rhos.empty() ? default_rho_grid() : cfg.rhos;
  ro.base.delta = cfg.delta.value_or(1e-3);
  ro.base.seed = cfg.seed;
  ro.base.schedule = cfg.schedule;
  if (cfg.max_iters) ro.base.max_iters = *cfg.max_iters;
  ro.base.keep_trace = false;
  ro.restarts = std::max<std::size_t>(cfg.restarts, 1);
  ro.jobs = cfg.jobs;
  for (double a : ro.alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha: values must lie in [0, 1]");
  const RegionSweep res = sweep_region(solver, ro);

  fs::create_directories(cfg.out);
  save_json((fs::path(cfg.out) / "channel.json").string(), channel_to_json(spec));
  std::string csv = region_csv_header(cfg.bits);
  json manifest = manifest_base(cfg);
  manifest["restarts"] = ro.restarts;
  manifest["points"] = json::array();
  bool capped = false;
  std::vector<RegionPoint> pts;
  for (std::size_t i = 0; i < res.cells.size(); ++i) {
    const RegionCell& c = res.cells[i];
    csv += region_csv_row(c.point, cfg.bits);
    json e = point_entry(i, c.point.rho1, c.point.flags, c.seconds);
    e["alpha"] = c.point.alpha;
    e["restart_weighted"] = c.restart_weighted;
    manifest["points"].push_back(e);
    capped |= (c.point.flags & kMaxIters) != 0;
    pts.push_back(c.point);
  }
  write_text((fs::path(cfg.out) / "region.csv").string(), csv);
  manifest["slice_violations"] = check_region_slices(pts, 1e-4).size();
  log << "wrote " << res.cells.size() << " points to " << (fs::path(cfg.out) / "region.csv").string() << "\n";
  return finish(cfg, manifest, capped, log);
}

int run_isac(const RunConfig& cfg, std::ostream& log) {
  const BCChannelSpec spec = build_bc_channel(cfg.channel);
  const std::vector<double> rhos = cfg.rhos.empty() ? default_rho_grid() : cfg.rhos;
  std::vector<IsacSolution> sols(rhos.size());
  std::vector<double> secs(rhos.size());
  parallel_for(rhos.size(), cfg.jobs, [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    IsacOptions o;
    o.delta = cfg.delta.value_or(o.delta);
    o.seed = derive_seed(cfg.seed, i);
    o.schedule = cfg.schedule;
    if (cfg.max_iters) o.max_iters = *cfg.max_iters;
    sols[i] = solve_isac(spec, rhos[i], o);
    sols[i].trace.clear();
    secs[i] = seconds_since(t0);
  });
  std::vector<std::size_t> order(rhos.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sols[a].point.distortion < sols[b].point.distortion;
  });

  fs::create_directories(cfg.out);
  save_json((fs::path(cfg.out) / "channel.json").string(), channel_to_json(spec));
  std::string csv = p2p_csv_header(cfg.bits);
  json manifest = manifest_base(cfg);
  manifest["points"] = json::array();
  bool capped = false;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const IsacSolution& s = sols[order[k]];
    csv += p2p_csv_row(s.point, cfg.bits);
    const EntropyReport er = entropy_report(s.p_x);
    json e = point_entry(k, s.point.rho, s.point.flags, secs[order[k]]);
    e["p_x"] = s.p_x;
    e["H_X"] = er.h_x;
    e["near_deterministic"] = er.near_deterministic;
    manifest["points"].push_back(e);
    capped |= (s.point.flags & kMaxIters) != 0;
  }
  write_text((fs::path(cfg.out) / "isac.csv").string(), csv);
  log << "wrote " << order.size() << " points to " << (fs::path(cfg.out) / "isac.csv").string() << "\n";
  return finish(cfg, manifest, capped, log);
}

int run_build(const RunConfig& cfg, std::ostream& log) {
  if (cfg.channel.builder.empty()) throw ConfigError("build-channel: needs a builder name");
  if (cfg.out.empty()) throw ConfigError("build-channel: --out <file> is required");
  const json j = builder_is_bc(cfg.channel.builder) ? channel_to_json(build_bc_channel(cfg.channel))
                                                   : channel_to_json(build_p2p_channel(cfg.channel));
  if (auto parent = fs::path(cfg.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  save_json(cfg.out, j);
  log << "wrote " << cfg.out << "\n";
  return 0;
}

// Re-checks every saved state of a p2p run: stationarity certificate,
// estimator against the brute-force minimiser, and the final gap.
int run_verify(const RunConfig& cfg, std::ostream& log) {
  const fs::path dir(cfg.out);
  const json manifest = load_json((dir / "manifest.json").string());
  if (manifest.value("task", "") != "p2p-curve")
    throw ConfigError("verify: only p2p-curve runs carry solver states (got '" + manifest.value("task", "") + "')");
  const ChannelSpec spec = channel_from_json(load_json((dir / "channel.json").string()));
  const json& mcfg = manifest.at("config");
  const CausalityMode mode = parse_mode(mcfg.at("mode").get<std::string>());
  const double delta = mcfg.contains("delta") ? mcfg["delta"].get<double>() : 1e-3;
  const EffectiveChannel eff = expand_shannon_strategy(spec, mode);

  json report = json::array();
  bool ok = true;
  log << std::setprecision(6);
  for (const auto& p : manifest.at("points")) {
    const std::string file = p.at("state").get<std::string>();
    const SolverState st = state_from_json(load_json((dir / file).string()), file);
    const auto cert = oracle::stationarity_certificate(eff, st);
    const auto joint = oracle::joint_s_given_context(eff, st);
    const auto best = oracle::brute_force_estimator(joint, spec.distortion);
    // ties: the estimator row may pick any minimiser
    std::size_t est_mismatch = 0;
    for (std::size_t ctx = 0; ctx < best.size(); ++ctx) {
      double mass = 0.0;
      for (const auto& row : joint) mass += row[ctx];
      if (mass <= 0.0) continue;
      auto cost = [&](std::size_t sh) {
        double c = 0.0;
        for (std::size_t s = 0; s < joint.size(); ++s) c += joint[s][ctx] * spec.distortion(s, sh);
        return c;
      };
      double got = 0.0;
      for (std::size_t sh = 0; sh < spec.sizes.s_hat; ++sh) got += st.est(ctx, sh) * cost(sh);
      if (got > cost(best[ctx]) + 1e-9 * std::max(1.0, std::abs(cost(best[ctx])))) ++est_mismatch;
    }
    const bool pass = cert.residual <= cfg.verify_tol && est_mismatch == 0 && st.B >= st.L - 1e-9 &&
                      (st.flags & kMaxIters ? true : st.B - st.L <= delta + 1e-12);
    ok &= pass;
    report.push_back({{"state", file},
                      {"rho", st.rho},
                      {"certificate_residual", cert.residual},
                      {"fd_max_rel_error", cert.fd_max_rel_error},
                      {"estimator_mismatches", est_mismatch},
                      {"gap", st.B - st.L},
                      {"pass", pass}});
    log << file << " rho=" << st.rho << " residual=" << cert.residual << " fd=" << cert.fd_max_rel_error
        << " est_mismatch=" << est_mismatch << " gap=" << st.B - st.L << (pass ? " ok" : " FAIL") << "\n";
  }
  save_json((dir / "verify.json").string(), json{{"tolerance", cfg.verify_tol}, {"points", report}, {"pass", ok}});
  return ok ? 0 : 4;
}

}  // namespace

RunConfig config_from_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("config: expected an object");
  check_keys(j,
             {"task", "channel", "mode", "rho", "alpha", "delta", "seed", "restarts", "jobs", "schedule",
              "max_iters", "strict", "bits", "out", "verify_tol"},
             "config");
  RunConfig c;
  if (auto it = j.find("task"); it != j.end()) c.task = parse_task(typed<std::string>(*it, "config.task"));
  if (auto it = j.find("channel"); it != j.end()) {
    if (it->is_string()) {
      fs::path p = typed<std::string>(*it, "config.channel");
      if (p.is_relative()) p = fs::path(base_dir) / p;
      c.channel.path = p.string();
    } else if (it->is_object()) {
      check_keys(*it, {"builder", "params"}, "config.channel");
      if (!it->contains("builder")) throw ConfigError("config.channel.builder: missing field");
      c.channel.builder = typed<std::string>((*it)["builder"], "config.channel.builder");
      require_builder(c.channel.builder);
      if (it->contains("params")) {
        if (!(*it)["params"].is_object()) throw ConfigError("config.channel.params: expected an object");
        c.channel.params = (*it)["params"];
      }
    } else {
      throw ConfigError("config.channel: expected a file path or {builder, params}");
    }
  }
  if (auto it = j.find("mode"); it != j.end()) {
    try {
      c.mode = parse_mode(typed<std::string>(*it, "config.mode"));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config.mode: ") + e.what());
    }
  }
  if (auto it = j.find("rho"); it != j.end()) c.rhos = grid_from_json(*it, "config.rho");
  if (auto it = j.find("alpha"); it != j.end()) c.alphas = grid_from_json(*it, "config.alpha");
  if (auto it = j.find("delta"); it != j.end()) c.delta = typed<double>(*it, "config.delta");
  opt_field(j, "seed", c.seed, "config");
  opt_field(j, "restarts", c.restarts, "config");
  opt_field(j, "jobs", c.jobs, "config");
  if (auto it = j.find("max_iters"); it != j.end()) c.max_iters = typed<std::size_t>(*it, "config.max_iters");
  opt_field(j, "strict", c.strict, "config");
  opt_field(j, "bits", c.bits, "config");
  opt_field(j, "verify_tol", c.verify_tol, "config");
  if (auto it = j.find("out"); it != j.end()) {
    fs::path p = typed<std::string>(*it, "config.out");
    c.out = (p.is_relative() ? fs::path(base_dir) / p : p).string();
  }
  if (auto it = j.find("schedule"); it != j.end()) {
    check_keys(*it, {"kind", "t0"}, "config.schedule");
    if (it->contains("kind")) {
      const auto k = typed<std::string>((*it)["kind"], "config.schedule.kind");
      if (k == "decay") c.schedule.kind = ProximalSchedule::Kind::Decay;
      else if (k == "constant") c.schedule.kind = ProximalSchedule::Kind::Constant;
      else throw ConfigError("config.schedule.kind: expected decay or constant");
    }
    opt_field(*it, "t0", c.schedule.t0, "config.schedule");
  }
  return c;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["task"] = to_string(c.task);
  if (!c.channel.builder.empty())
    j["channel"] = {{"builder", c.channel.builder}, {"params", c.channel.params}};
  else
    j["channel"] = c.channel.path;
  j["mode"] = mode_name(c.mode);
  j["rho"] = c.rhos;
  j["alpha"] = c.alphas;
  if (c.delta) j["delta"] = *c.delta;
  j["seed"] = c.seed;
  j["restarts"] = c.restarts;
  j["jobs"] = c.jobs;
  j["schedule"] = {{"kind", schedule_name(c.schedule)}, {"t0", c.schedule.t0}};
  if (c.max_iters) j["max_iters"] = *c.max_iters;
  j["strict"] = c.strict;
  j["bits"] = c.bits;
  j["out"] = c.out;
  return j;
}

ChannelSpec build_p2p_channel(const ChannelSource& src) {
  if (src.builder.empty()) {
    const json j = load_json(src.path);
    if (is_bc_channel_json(j)) throw ConfigError(src.path + ": broadcast spec given to a point-to-point task");
    return channel_from_json(j, src.path);
  }
  if (src.builder == "simo") return build_simo_channel(simo_params(src.params, "channel.params"));
  if (src.builder == "bsc") {
    check_keys(src.params, {"p"}, "channel.params");
    double p = 0.1;
    opt_field(src.params, "p", p, "channel.params");
    return build_bsc(p);
  }
  require_builder(src.builder);
  throw ConfigError("channel.builder: '" + src.builder + "' builds a broadcast channel");
}

BCChannelSpec build_bc_channel(const ChannelSource& src) {
  if (src.builder.empty()) {
    const json j = load_json(src.path);
    if (!is_bc_channel_json(j)) throw ConfigError(src.path + ": point-to-point spec given to a broadcast task");
    return bc_channel_from_json(j, src.path);
  }
  if (src.builder == "awgn-bc") return build_awgn_bc(awgn_params(src.params, "channel.params"));
  if (src.builder == "isac") return build_isac_bc(isac_params(src.params, "channel.params"));
  require_builder(src.builder);
  throw ConfigError("channel.builder: '" + src.builder + "' builds a point-to-point channel");
}

int run(const RunConfig& cfg, std::ostream& log) {
  if (cfg.delta && !(*cfg.delta > 0.0)) throw ConfigError("delta: must be positive");
  if (cfg.jobs == 0) throw ConfigError("jobs: must be at least 1");
  if (cfg.task == Task::BuildChannel) return run_build(cfg, log);
  if (cfg.out.empty()) throw ConfigError("out: an output directory is required");
  if (cfg.task == Task::Verify) return run_verify(cfg, log);
  if (cfg.channel.builder.empty() && cfg.channel.path.empty()) throw ConfigError("channel: no channel given");
  if (!cfg.channel.path.empty() && !fs::exists(cfg.channel.path))
    throw ConfigError("channel: file not found: " + cfg.channel.path);
  const bool bc = source_is_bc(cfg.channel);
  switch (cfg.task) {
    case Task::P2PCurve:
      if (bc) throw ConfigError("p2p-curve: channel is a broadcast spec");
      return run_p2p(cfg, log);
    case Task::BCRegion:
    case Task::IsacCurve:
      if (!bc) throw ConfigError(to_string(cfg.task) + ": channel is a point-to-point spec");
      return cfg.task == Task::BCRegion ? run_bc(cfg, log) : run_isac(cfg, log);
    default: return 1;
  }
}

int cli_main(int argc, char** argv) {
  CLI::App app{"capacity-distortion trade-off solver"};
  app.require_subcommand(1);

  std::string config_path, channel, mode, rho, alpha, schedule_kind, out, params;
  std::optional<double> delta, t0, verify_tol;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> restarts, jobs, max_iters;
  bool strict = false, bits = false;

  auto common = [&](CLI::App* sc, bool solve) {
    sc->add_option("--config", config_path, "JSON run config")->check(CLI::ExistingFile);
    sc->add_option("--out", out, "output directory (file for build-channel)");
    if (!solve) return;
    sc->add_option("--channel", channel, "channel spec file, or builder:NAME");
    sc->add_option("--params", params, "builder parameters as a JSON object");
    sc->add_option("--mode", mode, "sc | c | nc");
    sc->add_option("--rho", rho, "rho grid: list and/or log:lo:hi:n");
    sc->add_option("--delta", delta, "stopping tolerance on B - L");
    sc->add_option("--seed", seed, "master seed");
    sc->add_option("--restarts", restarts, "random restarts per point");
    sc->add_option("--jobs", jobs, "worker threads");
    sc->add_option("--schedule", schedule_kind, "decay | constant");
    sc->add_option("--t0", t0, "proximal schedule constant");
    sc->add_option("--max-iters", max_iters, "iteration cap per solve");
    sc->add_flag("--strict", strict, "nonzero exit if any point hits the iteration cap");
    sc->add_flag("--bits", bits, "add rate columns in bits");
  };
  CLI::App* p2p = app.add_subcommand("p2p-curve", "sweep the capacity-distortion curve");
  common(p2p, true);
  CLI::App* bc = app.add_subcommand("bc-region", "sweep the broadcast weighted-sum region");
  common(bc, true);
  bc->add_option("--alpha", alpha, "alpha grid in [0, 1]");
  CLI::App* isac = app.add_subcommand("isac-curve", "radar plus communication-user curve");
  common(isac, true);
  CLI::App* build = app.add_subcommand("build-channel", "write a builder's channel spec");
  std::string builder_name;
  build->add_option("builder", builder_name, "simo | bsc | awgn-bc | isac")->required();
  build->add_option("--params", params, "builder parameters as a JSON object");
  common(build, false);
  CLI::App* verify = app.add_subcommand("verify", "re-certify a finished p2p-curve run");
  verify->add_option("run_dir", out, "run directory")->required();
  verify->add_option("--tol", verify_tol, "certificate residual tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    RunConfig cfg;
    if (!config_path.empty()) {
      cfg = config_from_json(load_json(config_path), fs::path(config_path).parent_path().string());
    }
    cfg.task = parse_task(sub->get_name());
    auto parse_params = [&] {
      try {
        return json::parse(params);
      } catch (const json::parse_error& e) {
        throw ConfigError(std::string("--params: ") + e.what());
      }
    };
    if (sub == build) {
      cfg.channel = ChannelSource{};
      cfg.channel.builder = builder_name;
      require_builder(builder_name);
      if (!params.empty()) cfg.channel.params = parse_params();
    }
    if (!channel.empty()) {
      cfg.channel = ChannelSource{};
      if (channel.rfind("builder:", 0) == 0) {
        cfg.channel.builder = channel.substr(8);
        require_builder(cfg.channel.builder);
      } else {
        cfg.channel.path = channel;
      }
    }
    if (!params.empty() && sub != build) {
      if (cfg.channel.builder.empty()) throw ConfigError("--params: only valid with a builder channel");
      cfg.channel.params = parse_params();
    }
    if (!mode.empty()) cfg.mode = parse_mode(mode);
    if (!rho.empty()) cfg.rhos = parse_grid(rho, "--rho");
    if (!alpha.empty()) cfg.alphas = parse_grid(alpha, "--alpha");
    if (delta) cfg.delta = delta;
    if (seed) cfg.seed = *seed;
    if (restarts) cfg.restarts = *restarts;
    if (jobs) cfg.jobs = *jobs;
    if (max_iters) cfg.max_iters = max_iters;
    if (!schedule_kind.empty()) {
      if (schedule_kind == "decay") cfg.schedule.kind = ProximalSchedule::Kind::Decay;
      else if (schedule_kind == "constant") cfg.schedule.kind = ProximalSchedule::Kind::Constant;
      else throw ConfigError("--schedule: expected decay or constant");
    }
    if (t0) cfg.schedule.t0 = *t0;
    if (strict) cfg.strict = true;
    if (bits) cfg.bits = true;
    if (verify_tol) cfg.verify_tol = *verify_tol;
    if (!out.empty()) cfg.out = out;
    return run(cfg, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
  } catch (const ValidationError& e) {
    std::cerr << "invalid channel: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return 1;
}

}  // namespace cdtrade
