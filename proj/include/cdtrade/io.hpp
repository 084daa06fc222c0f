#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdtrade/channel.hpp"
#include "cdtrade/solver_bc.hpp"
#include "cdtrade/solver_p2p.hpp"

namespace cdtrade {

using json = nlohmann::json;

// Parse errors carry the file name and line/column; missing or mistyped
// fields name their path (e.g. "channel.sizes.S").
json load_json(const std::string& path);
void save_json(const std::string& path, const json& j);

json channel_to_json(const ChannelSpec& spec);
ChannelSpec channel_from_json(const json& j, const std::string& where = "channel");
json channel_to_json(const BCChannelSpec& spec);
BCChannelSpec bc_channel_from_json(const json& j, const std::string& where = "channel");
bool is_bc_channel_json(const json& j);

json cond_to_json(const CondDist& c);
CondDist cond_from_json(const json& j, const std::string& where);

// Converged states, for re-verification of a finished run.
json state_to_json(const SolverState& s);
SolverState state_from_json(const json& j, const std::string& where = "state");

// Numbers are written with 17 significant digits so the output is
// byte-identical across runs with the same inputs.
std::string format_double(double v);

std::string p2p_csv_header(bool bits);
std::string p2p_csv_row(const CDPoint& p, bool bits);
std::string region_csv_header(bool bits);
std::string region_csv_row(const RegionPoint& p, bool bits);

void write_text(const std::string& path, const std::string& text);

}  // namespace cdtrade
