#include "radego/io.hpp"

#include "radego/evaluation.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace radego {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& where, const std::string& field, const std::string& what) {
  throw InvalidInput(where + ": field '" + field + "': " + what);
}

double number(const json& obj, const char* key, const std::string& where, const std::string& prefix) {
  const auto it = obj.find(key);
  if (it == obj.end()) field_error(where, prefix + key, "missing");
  if (!it->is_number()) field_error(where, prefix + key, "expected a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) field_error(where, prefix + key, "not finite");
  return v;
}

std::optional<double> optional_number(const json& obj, const char* key, const std::string& where,
                                      const std::string& prefix) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return number(obj, key, where, prefix);
}

}  // namespace

std::string scan_to_json(const Scan& scan) {
  json targets = json::array();
  for (const auto& t : scan.targets) {
    json j = {{"r", t.range}, {"theta", t.azimuth}, {"sigma_r", t.range_std}, {"sigma_theta", t.azimuth_std}};
    if (t.doppler) {
      j["v"] = *t.doppler;
      j["sigma_v"] = t.doppler_std.value_or(0.0);
    }
    targets.push_back(std::move(j));
  }
  const json out = {{"timestamp_s", scan.timestamp},
                    {"mount", {{"x", scan.mount.x_offset}, {"y", scan.mount.y_offset}, {"yaw", scan.mount.yaw_offset}}},
                    {"targets", std::move(targets)}};
  return out.dump();
}

Scan scan_from_json(const std::string& line, const std::string& where) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw InvalidInput(where + ": malformed JSON: " + e.what());
  }
  if (!j.is_object()) throw InvalidInput(where + ": expected a JSON object");

  Scan scan;
  scan.timestamp = number(j, "timestamp_s", where, "");
  if (const auto m = j.find("mount"); m != j.end() && !m->is_null()) {
    if (!m->is_object()) field_error(where, "mount", "expected an object");
    scan.mount.x_offset = optional_number(*m, "x", where, "mount.").value_or(0.0);
    scan.mount.y_offset = optional_number(*m, "y", where, "mount.").value_or(0.0);
    scan.mount.yaw_offset = optional_number(*m, "yaw", where, "mount.").value_or(0.0);
  }
  const auto ts = j.find("targets");
  if (ts == j.end()) field_error(where, "targets", "missing");
  if (!ts->is_array()) field_error(where, "targets", "expected an array");
  for (std::size_t i = 0; i < ts->size(); ++i) {
    const json& o = (*ts)[i];
    const std::string prefix = "targets[" + std::to_string(i) + "].";
    if (!o.is_object()) field_error(where, prefix.substr(0, prefix.size() - 1), "expected an object");
    RadarTarget t;
    t.range = number(o, "r", where, prefix);
    t.azimuth = number(o, "theta", where, prefix);
    t.range_std = number(o, "sigma_r", where, prefix);
    t.azimuth_std = number(o, "sigma_theta", where, prefix);
    t.doppler = optional_number(o, "v", where, prefix);
    t.doppler_std = optional_number(o, "sigma_v", where, prefix);
    if (t.doppler.has_value() != t.doppler_std.has_value())
      field_error(where, prefix + (t.doppler ? "sigma_v" : "v"), "v and sigma_v must be given together");
    try {
      validate(t);
    } catch (const InvalidInput& e) {
      throw InvalidInput(where + ": " + prefix.substr(0, prefix.size() - 1) + ": " + e.what());
    }
    scan.targets.push_back(t);
  }
  return scan;
}

void write_scans(std::ostream& os, const std::vector<Scan>& scans) {
  for (const auto& s : scans) os << scan_to_json(s) << '\n';
}

std::vector<Scan> read_scans(std::istream& is, const std::string& source) {
  std::vector<Scan> scans;
  std::string line;
  for (std::size_t n = 1; std::getline(is, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    scans.push_back(scan_from_json(line, source + ":" + std::to_string(n)));
  }
  return scans;
}

std::vector<Scan> read_scans(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InvalidInput("cannot open scan file " + file.string());
  return read_scans(in, file.filename().string());
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

RunConfig default_config(Experiment e) {
  RunConfig c;
  c.simulation = preset(e);
  c.estimator = estimator_defaults(c.simulation);
  return c;
}

namespace {

double to_number(const std::string& s, const std::string& key) {
  try {
    const double v = parse_double(s);
    if (!std::isfinite(v)) throw InvalidInput("");
    return v;
  } catch (const InvalidInput&) {
    throw InvalidConfig("key '" + key + "': expected a number, got '" + s + "'");
  }
}

int to_int(const std::string& s, const std::string& key) {
  const double v = to_number(s, key);
  if (v != std::floor(v) || std::abs(v) > 2e9) throw InvalidConfig("key '" + key + "': expected an integer, got '" + s + "'");
  return static_cast<int>(v);
}

bool to_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw InvalidConfig("key '" + key + "': expected true or false, got '" + s + "'");
}

std::optional<double> to_optional(const std::string& s, const std::string& key) {
  if (s == "none" || s == "auto") return std::nullopt;
  return to_number(s, key);
}

std::string opt_text(const std::optional<double>& v, const char* unset) { return v ? format_double(*v) : unset; }

using Setter = std::function<void(const std::string&, const std::string&)>;

std::map<std::string, Setter> simulation_keys(SimConfig& s) {
  auto num = [](double& f) { return Setter([&f](const std::string& v, const std::string& k) { f = to_number(v, k); }); };
  auto integer = [](int& f) { return Setter([&f](const std::string& v, const std::string& k) { f = to_int(v, k); }); };
  return {
      {"configurations", integer(s.num_configurations)},
      {"landmarks", integer(s.num_landmarks)},
      {"range_min", num(s.range_min)},
      {"range_max", num(s.range_max)},
      {"azimuth_min", num(s.azimuth_min)},
      {"azimuth_max", num(s.azimuth_max)},
      {"cluster_fraction", num(s.cluster_fraction)},
      {"cluster_size", integer(s.cluster_size)},
      {"cluster_spread_std", num(s.cluster_spread_std)},
      {"runs_per_configuration", integer(s.runs_per_configuration)},
      {"trans_x_min", num(s.trans_x_min)},
      {"trans_x_max", num(s.trans_x_max)},
      {"trans_y_min", num(s.trans_y_min)},
      {"trans_y_max", num(s.trans_y_max)},
      {"rot_min", num(s.rot_min)},
      {"rot_max", num(s.rot_max)},
      {"noise_r_std", num(s.noise_r_std)},
      {"noise_theta_std", num(s.noise_theta_std)},
      {"doppler_std", num(s.doppler_std)},
      {"fov_half_angle", [&s](const std::string& v, const std::string& k) { s.fov_half_angle = to_optional(v, k); }},
      {"dt", num(s.dt)},
      {"dt_std", num(s.dt_std)},
      {"apply_noise", [&s](const std::string& v, const std::string& k) { s.apply_noise = to_bool(v, k); }},
      {"seed",
       [&s](const std::string& v, const std::string& k) {
         try {
           std::size_t used = 0;
           s.seed = std::stoull(v, &used);
           if (used != v.size()) throw std::invalid_argument(v);
         } catch (const std::exception&) {
           throw InvalidConfig("key '" + k + "': expected an unsigned integer, got '" + v + "'");
         }
       }},
  };
}

std::map<std::string, Setter> estimator_keys(EstimatorConfig& e) {
  auto num = [](double& f) { return Setter([&f](const std::string& v, const std::string& k) { f = to_number(v, k); }); };
  auto integer = [](int& f) { return Setter([&f](const std::string& v, const std::string& k) { f = to_int(v, k); }); };
  return {
      {"dof",
       [&e](const std::string& v, const std::string& k) {
         const int d = to_int(v, k);
         if (d != 2 && d != 3) throw InvalidConfig("key '" + k + "': dof must be 2 or 3");
         e.dof = d == 2 ? Dof::TwoDoF : Dof::ThreeDoF;
       }},
      {"use_doppler", [&e](const std::string& v, const std::string& k) { e.use_doppler = to_bool(v, k); }},
      {"fov_half_angle", num(e.fov_half_angle)},
      {"warmstart_scale", num(e.warmstart_scale)},
      {"warmstart_max_iters", integer(e.warmstart_max_iters)},
      {"max_iters", integer(e.max_iters)},
      {"cost_tolerance", num(e.cost_tolerance)},
      {"step_tolerance", num(e.step_tolerance)},
      {"damping", num(e.damping)},
  };
}

std::map<std::string, Setter> outlier_keys(OutlierConfig& o) {
  auto num = [](double& f) { return Setter([&f](const std::string& v, const std::string& k) { f = to_number(v, k); }); };
  return {
      {"alpha", num(o.alpha)},
      {"beta", num(o.beta)},
      {"s_min", num(o.s_min)},
      {"s_max", num(o.s_max)},
      {"sigma_theta", [&o](const std::string& v, const std::string& k) { o.sigma_theta = to_optional(v, k); }},
      {"weight", num(o.outlier_weight)},
  };
}

void apply_section(const boost::property_tree::ptree& section, const std::string& name,
                   const std::map<std::string, Setter>& keys, const std::string& source) {
  for (const auto& [key, node] : section) {
    const auto it = keys.find(key);
    if (it == keys.end()) throw InvalidConfig(source + ": unknown key '" + key + "' in [" + name + "]");
    try {
      it->second(node.data(), name + "." + key);
    } catch (const InvalidConfig& e) {
      throw InvalidConfig(source + ": " + e.what());
    }
  }
}

}  // namespace

RunConfig parse_config(std::istream& is, const std::string& source) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InvalidConfig(source + ": line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [name, node] : tree) {
    if (name != "simulation" && name != "estimator" && name != "outlier")
      throw InvalidConfig(source + ": unknown section [" + name + "]" +
                          (node.empty() ? " (keys must appear inside a section)" : ""));
  }

  const auto empty = boost::property_tree::ptree();
  const auto& sim_node = tree.get_child("simulation", empty);
  auto sim_section = sim_node;
  Experiment experiment = Experiment::SIM;
  double scale = 1.0;
  if (const auto p = sim_section.get_optional<std::string>("preset")) {
    try {
      experiment = experiment_from_string(*p);
    } catch (const InvalidConfig& e) {
      throw InvalidConfig(source + ": simulation.preset: " + e.what());
    }
    sim_section.erase("preset");
  }
  if (const auto s = sim_section.get_optional<std::string>("scale")) {
    try {
      scale = to_number(*s, "simulation.scale");
    } catch (const InvalidConfig& e) {
      throw InvalidConfig(source + ": " + e.what());
    }
    sim_section.erase("scale");
  }

  RunConfig cfg;
  cfg.simulation = preset(experiment);
  apply_section(sim_section, "simulation", simulation_keys(cfg.simulation), source);
  cfg.simulation = scaled(cfg.simulation, scale);
  validate(cfg.simulation);

  cfg.estimator = estimator_defaults(cfg.simulation);
  apply_section(tree.get_child("estimator", empty), "estimator", estimator_keys(cfg.estimator), source);
  apply_section(tree.get_child("outlier", empty), "outlier", outlier_keys(cfg.estimator.outlier), source);
  validate(cfg.estimator);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InvalidConfig("cannot open config file " + file.string());
  return parse_config(in, file.filename().string());
}

std::string serialize_config(const RunConfig& cfg) {
  const SimConfig& s = cfg.simulation;
  const EstimatorConfig& e = cfg.estimator;
  const OutlierConfig& o = e.outlier;
  auto f = [](double v) { return format_double(v); };
  std::ostringstream os;
  os << "[simulation]\n"
     << "preset=" << to_string(s.experiment) << '\n'
     << "configurations=" << s.num_configurations << '\n'
     << "landmarks=" << s.num_landmarks << '\n'
     << "range_min=" << f(s.range_min) << '\n'
     << "range_max=" << f(s.range_max) << '\n'
     << "azimuth_min=" << f(s.azimuth_min) << '\n'
     << "azimuth_max=" << f(s.azimuth_max) << '\n'
     << "cluster_fraction=" << f(s.cluster_fraction) << '\n'
     << "cluster_size=" << s.cluster_size << '\n'
     << "cluster_spread_std=" << f(s.cluster_spread_std) << '\n'
     << "runs_per_configuration=" << s.runs_per_configuration << '\n'
     << "trans_x_min=" << f(s.trans_x_min) << '\n'
     << "trans_x_max=" << f(s.trans_x_max) << '\n'
     << "trans_y_min=" << f(s.trans_y_min) << '\n'
     << "trans_y_max=" << f(s.trans_y_max) << '\n'
     << "rot_min=" << f(s.rot_min) << '\n'
     << "rot_max=" << f(s.rot_max) << '\n'
     << "noise_r_std=" << f(s.noise_r_std) << '\n'
     << "noise_theta_std=" << f(s.noise_theta_std) << '\n'
     << "doppler_std=" << f(s.doppler_std) << '\n'
     << "fov_half_angle=" << opt_text(s.fov_half_angle, "none") << '\n'
     << "dt=" << f(s.dt) << '\n'
     << "dt_std=" << f(s.dt_std) << '\n'
     << "apply_noise=" << (s.apply_noise ? "true" : "false") << '\n'
     << "seed=" << s.seed << '\n'
     << "\n[estimator]\n"
     << "dof=" << dimension(e.dof) << '\n'
     << "use_doppler=" << (e.use_doppler ? "true" : "false") << '\n'
     << "fov_half_angle=" << f(e.fov_half_angle) << '\n'
     << "warmstart_scale=" << f(e.warmstart_scale) << '\n'
     << "warmstart_max_iters=" << e.warmstart_max_iters << '\n'
     << "max_iters=" << e.max_iters << '\n'
     << "cost_tolerance=" << f(e.cost_tolerance) << '\n'
     << "step_tolerance=" << f(e.step_tolerance) << '\n'
     << "damping=" << f(e.damping) << '\n'
     << "\n[outlier]\n"
     << "alpha=" << f(o.alpha) << '\n'
     << "beta=" << f(o.beta) << '\n'
     << "s_min=" << f(o.s_min) << '\n'
     << "s_max=" << f(o.s_max) << '\n'
     << "sigma_theta=" << opt_text(o.sigma_theta, "auto") << '\n'
     << "weight=" << f(o.outlier_weight) << '\n';
  return os.str();
}

std::uint64_t fnv1a(const std::string& data, std::uint64_t h) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string config_hash(const RunConfig& cfg) { return hex16(fnv1a(serialize_config(cfg))); }

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

std::string truth_to_json(const SimulatedPair& pair, std::size_t index, std::uint64_t seed, const std::string& hash) {
  const MotionState& t = pair.truth;
  const json out = {{"pair", index},
                    {"config_index", pair.config_index},
                    {"run_index", pair.run_index},
                    {"truth",
                     {{"dof", dimension(t.dof)}, {"x", t.translation.x()}, {"y", t.translation.y()}, {"theta", t.rotation}}},
                    {"correspondence_map", pair.correspondence_map},
                    {"seed", seed},
                    {"config", hash}};
  return out.dump();
}

DatasetInfo write_dataset(const std::filesystem::path& dir, const RunConfig& cfg) {
  validate(cfg.simulation);
  std::filesystem::create_directories(dir);
  const std::string hash = config_hash(cfg);
  const char* names[] = {"prev.jsonl", "cur.jsonl", "truth.jsonl"};
  std::ofstream files[3];
  for (int i = 0; i < 3; ++i) {
    files[i].open(dir / names[i]);
    if (!files[i]) throw InvalidInput("cannot write " + (dir / names[i]).string());
  }
  const SimConfig& s = cfg.simulation;
  std::uint64_t data_hash = 14695981039346656037ULL;
  std::size_t index = 0;
  for (int c = 0; c < s.num_configurations; ++c) {
    for (int r = 0; r < s.runs_per_configuration; ++r, ++index) {
      const SimulatedPair pair = make_pair(s, c, r);
      const std::string lines[3] = {scan_to_json(pair.prev), scan_to_json(pair.cur),
                                    truth_to_json(pair, index, s.seed, hash)};
      for (int i = 0; i < 3; ++i) {
        files[i] << lines[i] << '\n';
        data_hash = fnv1a(lines[i] + '\n', data_hash);
      }
    }
  }
  DatasetInfo info{hash, index, hex16(data_hash)};
  const json manifest = {{"config_hash", hash},
                         {"seed", s.seed},
                         {"experiment", to_string(s.experiment)},
                         {"pairs", info.pairs},
                         {"data_hash", info.data_hash},
                         {"files", {{"prev", names[0]}, {"cur", names[1]}, {"truth", names[2]}}},
                         {"config", serialize_config(cfg)}};
  std::ofstream m(dir / "manifest.json");
  m << manifest.dump(2) << '\n';
  if (!m) throw InvalidInput("cannot write " + (dir / "manifest.json").string());
  return info;
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream m(manifest_path);
  if (!m) throw InvalidInput("cannot open " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(m);
  } catch (const json::parse_error& e) {
    throw InvalidInput("manifest.json: malformed JSON: " + std::string(e.what()));
  }
  if (!manifest.contains("config") || !manifest["config"].is_string())
    throw InvalidInput("manifest.json: field 'config': missing or not a string");

  Dataset ds;
  std::istringstream cfg_text(manifest["config"].get<std::string>());
  ds.config = parse_config(cfg_text, "manifest.json:config");
  ds.config_hash = config_hash(ds.config);

  const auto files = manifest.value("files", json::object());
  const auto prev = read_scans(dir / files.value("prev", "prev.jsonl"));
  const auto cur = read_scans(dir / files.value("cur", "cur.jsonl"));
  const std::string truth_name = files.value("truth", "truth.jsonl");
  std::ifstream truth_in(dir / truth_name);
  if (!truth_in) throw InvalidInput("cannot open " + (dir / truth_name).string());
  if (prev.size() != cur.size()) throw InvalidInput("prev and cur files hold different numbers of scans");

  std::string line;
  std::size_t n = 0;
  for (std::size_t lineno = 1; std::getline(truth_in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = truth_name + ":" + std::to_string(lineno);
    if (n >= prev.size()) throw InvalidInput(where + ": more truth records than scan pairs");
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InvalidInput(where + ": malformed JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("truth") || !j["truth"].is_object()) field_error(where, "truth", "missing");
    const json& t = j["truth"];
    SimulatedPair pair;
    pair.prev = prev[n];
    pair.cur = cur[n];
    const int dof = static_cast<int>(number(t, "dof", where, "truth."));
    if (dof != 2 && dof != 3) field_error(where, "truth.dof", "must be 2 or 3");
    pair.truth = MotionState::identity(dof == 2 ? Dof::TwoDoF : Dof::ThreeDoF);
    pair.truth.translation = {number(t, "x", where, "truth."), number(t, "y", where, "truth.")};
    pair.truth.rotation = number(t, "theta", where, "truth.");
    pair.config_index = static_cast<int>(number(j, "config_index", where, ""));
    pair.run_index = static_cast<int>(number(j, "run_index", where, ""));
    const auto cm = j.find("correspondence_map");
    if (cm == j.end() || !cm->is_array()) field_error(where, "correspondence_map", "missing or not an array");
    for (const auto& v : *cm) {
      if (!v.is_number_integer()) field_error(where, "correspondence_map", "expected integers");
      pair.correspondence_map.push_back(v.get<int>());
    }
    if (pair.correspondence_map.size() != pair.cur.size())
      field_error(where, "correspondence_map", "length differs from the current scan");
    ds.pairs.push_back(std::move(pair));
    ++n;
  }
  if (n != prev.size()) throw InvalidInput(truth_name + ": fewer truth records than scan pairs");
  return ds;
}

}  // namespace radego
