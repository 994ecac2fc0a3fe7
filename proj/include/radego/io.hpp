#pragma once

#include "radego/estimator.hpp"
#include "radego/simulation.hpp"
#include "radego/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace radego {

// ---------------------------------------------------------------------------
// Scan files: one JSON object per line,
// {timestamp_s, mount:{x,y,yaw}, targets:[{r, theta, sigma_r, sigma_theta, v?, sigma_v?}]}
// ---------------------------------------------------------------------------

std::string scan_to_json(const Scan& scan);
/// `where` prefixes error messages, e.g. "cur.jsonl:12".
Scan scan_from_json(const std::string& line, const std::string& where = "scan");

void write_scans(std::ostream& os, const std::vector<Scan>& scans);
/// Blank lines are skipped; line numbers in errors are 1-based.
std::vector<Scan> read_scans(std::istream& is, const std::string& source = "<stream>");
std::vector<Scan> read_scans(const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Run configuration (INI with [simulation], [estimator] and [outlier])
// ---------------------------------------------------------------------------

struct RunConfig {
  SimConfig simulation;
  EstimatorConfig estimator;
};

/// Preset simulation settings with matching estimator defaults.
RunConfig default_config(Experiment e);

/// Keys not given keep the values of `preset` in [simulation] (default sim),
/// estimator keys default to estimator_defaults() of the simulation. Unknown
/// sections or keys throw InvalidConfig.
RunConfig parse_config(std::istream& is, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& file);

/// Canonical text: every key, fixed order, shortest round-trip numbers.
std::string serialize_config(const RunConfig& cfg);
/// 16 hex digits of FNV-1a over serialize_config().
std::string config_hash(const RunConfig& cfg);
std::uint64_t fnv1a(const std::string& data, std::uint64_t h = 14695981039346656037ULL);

// ---------------------------------------------------------------------------
// Datasets: prev.jsonl, cur.jsonl, truth.jsonl (line k = pair k), manifest.json
// ---------------------------------------------------------------------------

/// Truth sidecar line: {pair, config_index, run_index, truth:{dof,x,y,theta},
/// correspondence_map, seed, config}. `config` holds the config hash.
std::string truth_to_json(const SimulatedPair& pair, std::size_t index, std::uint64_t seed, const std::string& hash);

struct DatasetInfo {
  std::string config_hash;
  std::size_t pairs = 0;
  /// FNV-1a over the three data files, in order.
  std::string data_hash;
};

/// Generates every pair of `cfg` into `dir` (created if needed).
DatasetInfo write_dataset(const std::filesystem::path& dir, const RunConfig& cfg);

struct Dataset {
  RunConfig config;
  std::string config_hash;
  std::vector<SimulatedPair> pairs;
};

Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace radego
