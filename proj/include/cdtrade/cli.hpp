#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdtrade/channel.hpp"
#include "cdtrade/simplex.hpp"

namespace cdtrade {

inline constexpr const char* kArtifactVersion = "0.1.0";

enum class Task { P2PCurve, BCRegion, IsacCurve, BuildChannel, Verify };
std::string to_string(Task t);
Task parse_task(const std::string& s);

// Channel source: a spec file, or a builder name with its parameter object.
struct ChannelSource {
  std::string path;
  std::string builder;  // simo | awgn-bc | isac | bsc
  nlohmann::json params = nlohmann::json::object();
};

struct RunConfig {
  Task task = Task::P2PCurve;
  ChannelSource channel;
  CausalityMode mode = CausalityMode::NonCausal;
  std::vector<double> rhos;    // empty = default grid
  std::vector<double> alphas;  // empty = {0, .25, .5, .75, 1}
  std::optional<double> delta;
  std::uint64_t seed = 0;
  std::size_t restarts = 0;    // 0 = solver default
  std::size_t jobs = 1;
  ProximalSchedule schedule;
  std::optional<std::size_t> max_iters;
  bool strict = false;
  bool bits = false;
  std::string out;             // directory, or file for build-channel
  double verify_tol = 1e-6;
};

// "0,0.5,log:1e-2:1e3:20": comma-separated numbers and log-spaced ranges.
std::vector<double> parse_grid(const std::string& text, const std::string& what);

// Config file contents; relative paths resolve against base_dir.
RunConfig config_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
nlohmann::json config_to_json(const RunConfig& c);

ChannelSpec build_p2p_channel(const ChannelSource& src);
BCChannelSpec build_bc_channel(const ChannelSource& src);

// Exit codes: 0 ok, 1 error, 2 usage, 3 MaxIters under --strict, 4 verify failed.
int run(const RunConfig& cfg, std::ostream& log);
int cli_main(int argc, char** argv);

}  // namespace cdtrade
