#include "cdtrade/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cdtrade/errors.hpp"

namespace cdtrade {

namespace {

const json& field(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(where + "." + key + ": missing field");
  return *it;
}

std::size_t get_size(const json& j, const std::string& key, const std::string& where) {
  const json& v = field(j, key, where);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw ConfigError(where + "." + key + ": expected a nonnegative integer");
  return v.get<std::size_t>();
}

std::vector<double> get_reals(const json& j, const std::string& key, const std::string& where,
                              std::size_t expect) {
  const json& v = field(j, key, where);
  const std::string path = where + "." + key;
  if (!v.is_array()) throw ConfigError(path + ": expected an array of numbers");
  if (v.size() != expect)
    throw ConfigError(path + ": expected " + std::to_string(expect) + " entries, got " +
                      std::to_string(v.size()));
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(path + "[" + std::to_string(i) + "]: expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

std::vector<std::size_t> get_indices(const json& j, const std::string& key, const std::string& where,
                                     std::size_t expect) {
  const json& v = field(j, key, where);
  const std::string path = where + "." + key;
  if (!v.is_array() || v.size() != expect)
    throw ConfigError(path + ": expected an array of " + std::to_string(expect) + " indices");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number_integer() || v[i].get<long long>() < 0)
      throw ConfigError(path + "[" + std::to_string(i) + "]: expected a nonnegative integer");
    out.push_back(v[i].get<std::size_t>());
  }
  return out;
}

json labels_to_json(const Labels& l) {
  json j = json::object();
  for (const auto& [k, v] : l) j[k] = v;
  return j;
}

Labels labels_from_json(const json& j, const std::string& where) {
  Labels out;
  auto it = j.find("labels");
  if (it == j.end()) return out;
  if (!it->is_object()) throw ConfigError(where + ".labels: expected an object");
  for (auto& [k, v] : it->items()) {
    if (!v.is_array()) throw ConfigError(where + ".labels." + k + ": expected an array of numbers");
    out[k] = v.get<std::vector<double>>();
  }
  return out;
}

std::uint64_t meta_seed(const json& j) {
  auto it = j.find("meta");
  if (it == j.end() || !it->is_object() || !it->contains("seed")) return 0;
  return (*it)["seed"].get<std::uint64_t>();
}

// validate() failures are reported against the file section they came from
template <class Spec>
void validate_as(const Spec& s, const std::string& where) {
  try {
    s.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

}  // namespace

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void save_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(path + ": cannot write");
  out << text;
}

json cond_to_json(const CondDist& c) {
  return json{{"cond", c.cond_labels()}, {"shape", c.cond_shape()}, {"out", c.out_label()},
              {"size", c.cols()}, {"data", c.data()}};
}

CondDist cond_from_json(const json& j, const std::string& where) {
  const json& cl = field(j, "cond", where);
  const json& sh = field(j, "shape", where);
  if (!cl.is_array() || !sh.is_array() || cl.size() != sh.size())
    throw ConfigError(where + ": cond and shape must be arrays of equal length");
  auto labels = cl.get<std::vector<std::string>>();
  auto shape = sh.get<std::vector<std::size_t>>();
  const json& out = field(j, "out", where);
  if (!out.is_string()) throw ConfigError(where + ".out: expected a string");
  const std::size_t cols = get_size(j, "size", where);
  std::size_t rows = 1;
  for (auto s : shape) rows *= s;
  auto data = get_reals(j, "data", where, rows * cols);
  return CondDist(std::move(labels), std::move(shape), out.get<std::string>(), cols, std::move(data));
}

json channel_to_json(const ChannelSpec& spec) {
  const auto& z = spec.sizes;
  json j;
  j["sizes"] = {{"S", z.s}, {"S_T", z.s_t}, {"X", z.x}, {"Z", z.z}, {"Shat", z.s_hat}, {"Yp", z.y_fb}};
  j["p_S"] = spec.p_s.values();
  j["p_ST_given_S"] = spec.p_st_given_s.data();
  j["p_Z_given_XS"] = spec.p_z_given_xs.data();
  j["feedback_map"] = spec.feedback_map;
  j["distortion"] = spec.distortion.data;
  j["labels"] = labels_to_json(spec.labels);
  j["meta"] = {{"seed", spec.seed}};
  return j;
}

ChannelSpec channel_from_json(const json& j, const std::string& where) {
  const json& sz = field(j, "sizes", where);
  const std::string ws = where + ".sizes";
  ChannelSpec spec;
  auto& z = spec.sizes;
  z.s = get_size(sz, "S", ws);
  z.s_t = get_size(sz, "S_T", ws);
  z.x = get_size(sz, "X", ws);
  z.z = get_size(sz, "Z", ws);
  z.s_hat = get_size(sz, "Shat", ws);
  z.y_fb = get_size(sz, "Yp", ws);
  try {
    spec.p_s = ProbVec(get_reals(j, "p_S", where, z.s));
  } catch (const ValidationError& e) {
    throw ValidationError(where + ".p_S: " + e.what());
  }
  spec.p_st_given_s = CondDist({"s"}, {z.s}, "s_t", z.s_t, get_reals(j, "p_ST_given_S", where, z.s * z.s_t));
  spec.p_z_given_xs =
      CondDist({"x", "s"}, {z.x, z.s}, "z", z.z, get_reals(j, "p_Z_given_XS", where, z.x * z.s * z.z));
  spec.feedback_map = get_indices(j, "feedback_map", where, z.z);
  spec.distortion = Matrix(z.s, z.s_hat);
  spec.distortion.data = get_reals(j, "distortion", where, z.s * z.s_hat);
  spec.labels = labels_from_json(j, where);
  spec.seed = meta_seed(j);
  validate_as(spec, where);
  return spec;
}

json channel_to_json(const BCChannelSpec& spec) {
  const auto& z = spec.sizes;
  json j;
  j["sizes"] = {{"S", z.s},   {"S_T", z.s_t},      {"X", z.x},     {"Z1", z.z1},
                {"Z2", z.z2}, {"Shat", z.s_hat}, {"Yp", z.y_fb}};
  j["p_S"] = spec.p_s.values();
  j["p_ST_given_S"] = spec.p_st_given_s.data();
  j["p_Z1Z2_given_XS"] = spec.p_z1z2_given_xs.data();
  j["feedback_map"] = spec.feedback_map;
  j["distortion"] = spec.distortion.data;
  j["labels"] = labels_to_json(spec.labels);
  j["meta"] = {{"seed", spec.seed}};
  return j;
}

BCChannelSpec bc_channel_from_json(const json& j, const std::string& where) {
  const json& sz = field(j, "sizes", where);
  const std::string ws = where + ".sizes";
  BCChannelSpec spec;
  auto& z = spec.sizes;
  z.s = get_size(sz, "S", ws);
  z.s_t = get_size(sz, "S_T", ws);
  z.x = get_size(sz, "X", ws);
  z.z1 = get_size(sz, "Z1", ws);
  z.z2 = get_size(sz, "Z2", ws);
  z.s_hat = get_size(sz, "Shat", ws);
  z.y_fb = get_size(sz, "Yp", ws);
  try {
    spec.p_s = ProbVec(get_reals(j, "p_S", where, z.s));
  } catch (const ValidationError& e) {
    throw ValidationError(where + ".p_S: " + e.what());
  }
  spec.p_st_given_s = CondDist({"s"}, {z.s}, "s_t", z.s_t, get_reals(j, "p_ST_given_S", where, z.s * z.s_t));
  spec.p_z1z2_given_xs = CondDist({"x", "s"}, {z.x, z.s}, "z1,z2", z.z1 * z.z2,
                                  get_reals(j, "p_Z1Z2_given_XS", where, z.x * z.s * z.z1 * z.z2));
  spec.feedback_map = get_indices(j, "feedback_map", where, z.z1);
  spec.distortion = Matrix(z.s, z.s_hat);
  spec.distortion.data = get_reals(j, "distortion", where, z.s * z.s_hat);
  spec.labels = labels_from_json(j, where);
  spec.seed = meta_seed(j);
  validate_as(spec, where);
  return spec;
}

bool is_bc_channel_json(const json& j) { return j.is_object() && j.contains("p_Z1Z2_given_XS"); }

json state_to_json(const SolverState& s) {
  return json{{"p_u", cond_to_json(s.p_u)},
              {"p_v", cond_to_json(s.p_v)},
              {"q_u", cond_to_json(s.q_u)},
              {"q_v", cond_to_json(s.q_v)},
              {"est", cond_to_json(s.est)},
              {"iteration", s.iteration},
              {"L", s.L},
              {"B", s.B},
              {"rho", s.rho},
              {"schedule",
               {{"kind", s.schedule.kind == ProximalSchedule::Kind::Decay ? "decay" : "constant"},
                {"t0", s.schedule.t0}}},
              {"flags", s.flags}};
}

SolverState state_from_json(const json& j, const std::string& where) {
  SolverState s;
  s.p_u = cond_from_json(field(j, "p_u", where), where + ".p_u");
  s.p_v = cond_from_json(field(j, "p_v", where), where + ".p_v");
  s.q_u = cond_from_json(field(j, "q_u", where), where + ".q_u");
  s.q_v = cond_from_json(field(j, "q_v", where), where + ".q_v");
  s.est = cond_from_json(field(j, "est", where), where + ".est");
  s.iteration = get_size(j, "iteration", where);
  s.L = field(j, "L", where).get<double>();
  s.B = field(j, "B", where).get<double>();
  s.rho = field(j, "rho", where).get<double>();
  const json& sch = field(j, "schedule", where);
  s.schedule.kind = field(sch, "kind", where + ".schedule").get<std::string>() == "constant"
                        ? ProximalSchedule::Kind::Constant
                        : ProximalSchedule::Kind::Decay;
  s.schedule.t0 = field(sch, "t0", where + ".schedule").get<double>();
  s.flags = field(j, "flags", where).get<std::uint32_t>();
  return s;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string p2p_csv_header(bool bits) {
  return std::string("rho,distortion,rate_nats,iterations,gap,L,B,flags") + (bits ? ",rate_bits" : "") + "\n";
}

std::string p2p_csv_row(const CDPoint& p, bool bits) {
  std::ostringstream o;
  o << format_double(p.rho) << ',' << format_double(p.distortion) << ',' << format_double(p.rate) << ','
    << p.iterations << ',' << format_double(p.gap) << ',' << format_double(p.L) << ','
    << format_double(p.B) << ',' << flags_to_string(p.flags);
  if (bits) o << ',' << format_double(p.rate / std::log(2.0));
  o << '\n';
  return o.str();
}

std::string region_csv_header(bool bits) {
  return std::string("alpha,rho1,R1_nats,R0R2_nats,D1,iterations,gap,flags") +
         (bits ? ",R1_bits,R0R2_bits" : "") + "\n";
}

std::string region_csv_row(const RegionPoint& p, bool bits) {
  std::ostringstream o;
  o << format_double(p.alpha) << ',' << format_double(p.rho1) << ',' << format_double(p.r1) << ','
    << format_double(p.r0r2) << ',' << format_double(p.d1) << ',' << p.iterations << ','
    << format_double(p.gap) << ',' << flags_to_string(p.flags);
  if (bits) o << ',' << format_double(p.r1 / std::log(2.0)) << ',' << format_double(p.r0r2 / std::log(2.0));
  o << '\n';
  return o.str();
}

}  // namespace cdtrade
