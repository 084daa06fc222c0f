#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cdtrade/builders.hpp"
#include "cdtrade/cli.hpp"
#include "cdtrade/io.hpp"
#include "cdtrade/solver_p2p.hpp"

using namespace cdtrade;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("cdtrade_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct Run {
  int code = -1;
  std::string err;
};

// Runs the tool with stdout discarded and stderr captured.
Run tool(const std::string& args) {
  const auto err = scratch() / "stderr.txt";
  const std::string cmd = std::string(CDTRADE_TOOL_PATH) + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string l; std::getline(ss, l);) out.push_back(l);
  return out;
}

const char* kSmallSimo =
    "--params '{\"n_r\":2,\"n_theta\":3,\"n_y\":6,\"n_st\":2,\"psk\":2}'";

}  // namespace

TEST_CASE("grid parsing") {
  CHECK(parse_grid("0,0.5,2", "--rho") == std::vector<double>{0.0, 0.5, 2.0});
  auto g = parse_grid("log:1e-2:1e2:5", "--rho");
  REQUIRE(g.size() == 5);
  const double want[5] = {1e-2, 1e-1, 1.0, 10.0, 100.0};
  for (int i = 0; i < 5; ++i) CHECK(g[i] == doctest::Approx(want[i]).epsilon(1e-12));
  CHECK(parse_grid("0,log:1:10:2", "--rho").size() == 3);
  CHECK_THROWS_AS(parse_grid("abc", "--rho"), ConfigError);
  CHECK_THROWS_AS(parse_grid("log:1:2", "--rho"), ConfigError);
  CHECK_THROWS_WITH(parse_grid("1,x", "--rho"), doctest::Contains("--rho"));
}

TEST_CASE("run config survives a JSON round trip") {
  RunConfig c;
  c.task = Task::BCRegion;
  c.channel.builder = "awgn-bc";
  c.channel.params = {{"sigma_n1", 0.3}};
  c.mode = CausalityMode::Causal;
  c.rhos = {0.0, 0.5};
  c.alphas = {0.25};
  c.delta = 1e-6;
  c.seed = 42;
  c.restarts = 3;
  c.jobs = 2;
  c.schedule.kind = ProximalSchedule::Kind::Constant;
  c.schedule.t0 = 0.5;
  c.max_iters = 77;
  c.strict = true;
  c.bits = true;
  c.out = "somewhere";
  auto back = config_from_json(config_to_json(c), "");
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(back.rhos == c.rhos);
  CHECK(back.mode == CausalityMode::Causal);
  CHECK(*back.max_iters == 77);

  CHECK_THROWS_WITH_AS(config_from_json({{"rhoo", 1}}), doctest::Contains("rhoo"), ConfigError);
  CHECK_THROWS_WITH_AS(config_from_json({{"seed", "x"}}), doctest::Contains("config.seed"), ConfigError);
}

TEST_CASE("channel and state JSON round trips are exact") {
  auto simo = build_simo_channel(SimoParams{});
  auto back = channel_from_json(json::parse(channel_to_json(simo).dump()));
  CHECK(back.p_z_given_xs == simo.p_z_given_xs);
  CHECK(back.p_st_given_s == simo.p_st_given_s);
  CHECK(back.p_s.values() == simo.p_s.values());
  CHECK(back.distortion.data == simo.distortion.data);
  CHECK(back.feedback_map == simo.feedback_map);
  CHECK(back.sizes == simo.sizes);

  auto bc = build_awgn_bc(AwgnBcParams{});
  auto j = json::parse(channel_to_json(bc).dump());
  CHECK(is_bc_channel_json(j));
  CHECK_FALSE(is_bc_channel_json(channel_to_json(simo)));
  auto bback = bc_channel_from_json(j);
  CHECK(bback.p_z1z2_given_xs == bc.p_z1z2_given_xs);
  CHECK(bback.sizes == bc.sizes);

  P2PSolver solver(expand_shannon_strategy(build_bsc(0.2), CausalityMode::Causal));
  SolveOptions o;
  o.rho = 0.0;
  auto r = solver.solve(o);
  auto st = state_from_json(json::parse(state_to_json(r.state).dump()));
  CHECK(st.p_u == r.state.p_u);
  CHECK(st.est == r.state.est);
  CHECK(st.L == r.state.L);
  CHECK(st.iteration == r.state.iteration);

  auto broken = channel_to_json(simo);
  broken["p_S"].erase(0);
  CHECK_THROWS_WITH(channel_from_json(broken), doctest::Contains("p_S"));
}

TEST_CASE("p2p-curve on a BSC and verify") {
  const auto out = scratch() / "bsc";
  auto r = tool("p2p-curve --channel builder:bsc --params '{\"p\":0.1}' --rho 0 --delta 1e-12 --bits --out " +
                out.string());
  REQUIRE(r.code == 0);
  auto csv = lines(slurp(out / "curve.csv"));
  REQUIRE(csv.size() == 2);
  CHECK(csv[0] == "rho,distortion,rate_nats,iterations,gap,L,B,flags,rate_bits");
  std::stringstream row(csv[1]);
  std::string rho, d, rate;
  std::getline(row, rho, ',');
  std::getline(row, d, ',');
  std::getline(row, rate, ',');
  const double cap = std::log(2.0) + 0.1 * std::log(0.1) + 0.9 * std::log(0.9);
  CHECK(std::stod(rate) == doctest::Approx(cap).epsilon(1e-10));
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(fs::exists(out / "channel.json"));
  CHECK(fs::exists(out / "states" / "point_0.json"));

  auto v = tool("verify " + out.string());
  CHECK(v.code == 0);
  auto rep = load_json((out / "verify.json").string());
  CHECK(rep["pass"] == true);
  CHECK(rep["points"][0]["certificate_residual"].get<double>() <= 1e-6);
}

TEST_CASE("verify rejects a loosely converged run") {
  const auto out = scratch() / "loose";
  REQUIRE(tool(std::string("p2p-curve --channel builder:simo ") + kSmallSimo +
               " --mode nc --rho 0.001 --delta 0.5 --out " + out.string())
              .code == 0);
  auto v = tool("verify " + out.string() + " --tol 1e-12");
  CHECK(v.code == 4);
  CHECK(load_json((out / "verify.json").string())["pass"] == false);
}

TEST_CASE("same seed gives byte-identical curves") {
  const std::string common = std::string("p2p-curve --channel builder:simo ") + kSmallSimo +
                             " --mode c --rho 0,1e-3,1e-2 --seed 9 --restarts 2 --out ";
  REQUIRE(tool(common + (scratch() / "det1").string()).code == 0);
  REQUIRE(tool(common + (scratch() / "det2").string() + " --jobs 2").code == 0);
  const auto a = slurp(scratch() / "det1" / "curve.csv");
  CHECK_FALSE(a.empty());
  CHECK(a == slurp(scratch() / "det2" / "curve.csv"));
}

TEST_CASE("build-channel writes the builder's spec exactly") {
  const auto file = scratch() / "simo.json";
  REQUIRE(tool("build-channel simo --out " + file.string()).code == 0);
  auto spec = channel_from_json(load_json(file.string()));
  auto ref = build_simo_channel(SimoParams{});
  CHECK(spec.p_z_given_xs == ref.p_z_given_xs);
  CHECK(spec.p_s.values() == ref.p_s.values());
  CHECK(spec.distortion.data == ref.distortion.data);

  // a saved spec drives a run like the builder does
  const auto out = scratch() / "fromfile";
  CHECK(tool("p2p-curve --channel " + file.string() + " --rho 0 --mode sc --out " + out.string()).code == 0);
}

TEST_CASE("bc-region and isac-curve write their tables") {
  const auto bc = scratch() / "bc";
  REQUIRE(tool("bc-region --channel builder:awgn-bc --params '{\"n_s1\":2,\"n_s2\":2,\"n_st\":1,\"n_y1\":2,"
               "\"n_y2\":2,\"psk\":2}' --mode sc --alpha 0,1 --rho 0 --out " +
               bc.string())
              .code == 0);
  auto rows = lines(slurp(bc / "region.csv"));
  CHECK(rows.size() == 3);
  CHECK(rows[0] == "alpha,rho1,R1_nats,R0R2_nats,D1,iterations,gap,flags");

  const auto is = scratch() / "isac";
  REQUIRE(tool("isac-curve --channel builder:isac --params '{\"n_y1\":4,\"n_y2\":4,\"psk\":2}' "
               "--rho 0,1 --out " +
               is.string())
              .code == 0);
  CHECK(lines(slurp(is / "isac.csv")).size() == 3);
  CHECK(load_json((is / "manifest.json").string()).contains("points"));
}

TEST_CASE("errors and exit codes") {
  SUBCASE("unknown subcommand") { CHECK(tool("frobnicate").code == 2); }
  SUBCASE("malformed config reports line and column") {
    const auto cfg = scratch() / "bad.json";
    std::ofstream(cfg) << "{\n  \"rho\": [0, 1,\n}";
    auto r = tool("p2p-curve --config " + cfg.string());
    CHECK(r.code == 1);
    CHECK(r.err.find("config error") != std::string::npos);
    CHECK(r.err.find("line") != std::string::npos);
  }
  SUBCASE("unknown builder parameter names the field") {
    auto r = tool("p2p-curve --channel builder:simo --params '{\"nr\":2}' --out " + (scratch() / "x").string());
    CHECK(r.code == 1);
    CHECK(r.err.find("channel.params.nr") != std::string::npos);
  }
  SUBCASE("wrong parameter type") {
    auto r = tool("p2p-curve --channel builder:simo --params '{\"n_r\":\"eight\"}' --out " +
                  (scratch() / "x").string());
    CHECK(r.code == 1);
    CHECK(r.err.find("channel.params.n_r") != std::string::npos);
  }
  SUBCASE("broadcast builder for a point-to-point task") {
    CHECK(tool("p2p-curve --channel builder:isac --out " + (scratch() / "x").string()).code == 1);
  }
  SUBCASE("invalid channel file") {
    auto spec = channel_to_json(build_bsc(0.1));
    spec["feedback_map"] = {0};
    const auto f = scratch() / "badchan.json";
    save_json(f.string(), spec);
    auto r = tool("p2p-curve --channel " + f.string() + " --out " + (scratch() / "x").string());
    CHECK(r.code == 1);
    CHECK(r.err.find("feedback_map") != std::string::npos);
  }
  SUBCASE("strict mode turns the iteration cap into exit code 3") {
    const std::string base = std::string("p2p-curve --channel builder:simo ") + kSmallSimo +
                             " --rho 0.001 --delta 1e-12 --max-iters 2 --out " + (scratch() / "cap").string();
    CHECK(tool(base).code == 0);
    CHECK(tool(base + " --strict").code == 3);
  }
}
