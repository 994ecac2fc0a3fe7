#include "radego/simulation.hpp"

#include "radego/baseline_sa.hpp"
#include "radego/doppler.hpp"
#include "radego/geometry.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace radego {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr std::uint64_t kSceneStream = std::numeric_limits<std::uint64_t>::max();

enum StreamPurpose : std::uint64_t {
  kLandmarks = 1,
  kClusters = 2,
  kTransform = 3,
  kPrevNoise = 4,
  kCurNoise = 5,
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double gaussian(std::mt19937_64& rng, double stddev) { return std::normal_distribution<double>(0.0, stddev)(rng); }

}  // namespace

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::PSR: return "psr";
    case Experiment::PSR_C: return "psr-c";
    case Experiment::SIM: return "sim";
    case Experiment::SIM_C: return "sim-c";
  }
  return "?";
}

Experiment experiment_from_string(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  std::replace(n.begin(), n.end(), '_', '-');
  if (n == "psr") return Experiment::PSR;
  if (n == "psr-c") return Experiment::PSR_C;
  if (n == "sim") return Experiment::SIM;
  if (n == "sim-c") return Experiment::SIM_C;
  throw InvalidConfig("unknown experiment '" + name + "' (expected psr, psr-c, sim or sim-c)");
}

Dof SimConfig::dof() const {
  return (experiment == Experiment::PSR || experiment == Experiment::PSR_C) ? Dof::ThreeDoF : Dof::TwoDoF;
}

void validate(const SimConfig& cfg) {
  if (cfg.num_configurations <= 0 || cfg.num_landmarks <= 0 || cfg.runs_per_configuration <= 0)
    throw InvalidConfig("simulation counts must be positive");
  if (!(cfg.range_min > 0.0 && cfg.range_min <= cfg.range_max)) throw InvalidConfig("range bounds must be 0 < min <= max");
  if (!(cfg.azimuth_min <= cfg.azimuth_max)) throw InvalidConfig("azimuth bounds are not ordered");
  if (!(cfg.trans_x_min <= cfg.trans_x_max && cfg.trans_y_min <= cfg.trans_y_max && cfg.rot_min <= cfg.rot_max))
    throw InvalidConfig("transform bounds are not ordered");
  if (!(cfg.cluster_fraction >= 0.0 && cfg.cluster_fraction <= 1.0)) throw InvalidConfig("cluster_fraction must lie in [0, 1]");
  if (cfg.cluster_size < 1 || cfg.cluster_spread_std < 0.0) throw InvalidConfig("invalid cluster settings");
  if (!(cfg.noise_r_std > 0.0 && cfg.noise_theta_std > 0.0))
    throw InvalidConfig("measurement standard deviations must be positive (use apply_noise=false for noise-free data)");
  if (cfg.doppler_std < 0.0) throw InvalidConfig("doppler_std must be >= 0");
  if (cfg.fov_half_angle && !(*cfg.fov_half_angle > 0.0)) throw InvalidConfig("fov_half_angle must be positive");
  if (!(cfg.dt > 0.0) || cfg.dt_std < 0.0) throw InvalidConfig("dt must be positive and dt_std non-negative");
}

SimConfig preset(Experiment e) {
  SimConfig c;
  c.experiment = e;
  if (e == Experiment::PSR || e == Experiment::PSR_C) {
    c.num_configurations = 100;
    c.runs_per_configuration = 1000;
    c.range_min = 5.0;
    c.range_max = 15.0;
    c.azimuth_min = -std::numbers::pi;
    c.azimuth_max = std::numbers::pi;
    c.trans_y_min = -0.25;
    c.trans_y_max = 0.25;
    c.doppler_std = 0.0;
    c.fov_half_angle.reset();
  } else {
    c.num_configurations = 50;
    c.runs_per_configuration = 500;
    c.range_min = 2.0;
    c.range_max = 38.0;
    c.azimuth_min = -55.0 * kDeg;
    c.azimuth_max = 55.0 * kDeg;
    c.trans_y_min = 0.0;
    c.trans_y_max = 0.0;
    c.doppler_std = 0.3;
    c.fov_half_angle = 55.0 * kDeg;
  }
  c.num_landmarks = 20;
  c.trans_x_min = -0.25;
  c.trans_x_max = 0.25;
  c.rot_min = -15.0 * kDeg;
  c.rot_max = 15.0 * kDeg;
  c.noise_r_std = 0.2;
  c.noise_theta_std = 3.0 * kDeg;
  c.cluster_size = 3;
  c.cluster_spread_std = 0.1;
  c.cluster_fraction = (e == Experiment::PSR_C || e == Experiment::SIM_C) ? 0.4 : 0.0;
  return c;
}

SimConfig scaled(SimConfig cfg, double scale) {
  if (!(scale > 0.0)) throw InvalidConfig("scale must be positive");
  cfg.runs_per_configuration =
      std::max(1, static_cast<int>(std::lround(static_cast<double>(cfg.runs_per_configuration) * scale)));
  return cfg;
}

EstimatorConfig estimator_defaults(const SimConfig& cfg) {
  EstimatorConfig e;
  e.dof = cfg.dof();
  if (cfg.fov_half_angle) {
    e.fov_half_angle = *cfg.fov_half_angle;
    e.outlier.outlier_weight = 0.25;
  } else {
    // every landmark stays visible without a field-of-view limit
    e.fov_half_angle = std::numbers::pi;
    e.outlier.outlier_weight = 0.0;
  }
  return e;
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

Landmarks generate_landmarks(const SimConfig& cfg, std::mt19937_64& rng) {
  Landmarks out;
  out.reserve(static_cast<std::size_t>(cfg.num_landmarks));
  for (int i = 0; i < cfg.num_landmarks; ++i) {
    const double r = uniform(rng, cfg.range_min, cfg.range_max);
    const double th = uniform(rng, cfg.azimuth_min, cfg.azimuth_max);
    out.emplace_back(r * std::cos(th), r * std::sin(th));
  }
  return out;
}

Landmarks apply_clustering(const Landmarks& landmarks, const SimConfig& cfg, std::mt19937_64& rng) {
  const auto n = landmarks.size();
  const auto chosen = static_cast<std::size_t>(std::lround(cfg.cluster_fraction * static_cast<double>(n)));
  if (chosen == 0 || cfg.cluster_size <= 1) return landmarks;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // partial Fisher-Yates; std::shuffle is implementation-defined
  for (std::size_t i = 0; i < chosen; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(
                                  std::uniform_int_distribution<std::uint64_t>(0, n - 1 - i)(rng));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(chosen);
  std::sort(idx.begin(), idx.end());
  Landmarks out = landmarks;
  for (std::size_t i : idx)
    for (int k = 1; k < cfg.cluster_size; ++k)
      out.push_back(landmarks[i] + Eigen::Vector2d(gaussian(rng, cfg.cluster_spread_std),
                                                   gaussian(rng, cfg.cluster_spread_std)));
  return out;
}

MotionState sample_transform(const SimConfig& cfg, std::mt19937_64& rng) {
  MotionState m = MotionState::identity(cfg.dof());
  m.translation.x() = uniform(rng, cfg.trans_x_min, cfg.trans_x_max);
  if (cfg.dof() == Dof::ThreeDoF) m.translation.y() = uniform(rng, cfg.trans_y_min, cfg.trans_y_max);
  m.rotation = uniform(rng, cfg.rot_min, cfg.rot_max);
  return m;
}

Scan simulate_scan(const Landmarks& landmarks, const MotionState& pose, const SimConfig& cfg, std::mt19937_64& rng,
                   bool with_doppler, std::vector<int>* visible) {
  Scan scan;
  if (visible) visible->clear();
  const Eigen::Matrix2d rt = rotation(pose.rotation).transpose();
  const Eigen::Vector2d t = to_pose(pose).t;
  const bool doppler = with_doppler && cfg.doppler_std > 0.0;
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    const Eigen::Vector2d m = rt * (landmarks[i] - t);
    const double r = m.norm();
    const double th = std::atan2(m.y(), m.x());
    if (cfg.fov_half_angle && std::abs(th) > *cfg.fov_half_angle) continue;
    RadarTarget target;
    target.range = r;
    target.azimuth = th;
    target.range_std = cfg.noise_r_std;
    target.azimuth_std = cfg.noise_theta_std;
    if (cfg.apply_noise) {
      target.range += gaussian(rng, cfg.noise_r_std);
      target.azimuth = wrap_angle(target.azimuth + gaussian(rng, cfg.noise_theta_std));
    }
    if (doppler) {
      // simulated with the measurement model at the true state and azimuth
      const double u = detail::doppler_prediction(pose.translation.x(), pose.rotation, th, scan.mount);
      double v = u / cfg.dt;
      if (cfg.apply_noise) v += gaussian(rng, cfg.doppler_std);
      target.doppler = v;
      target.doppler_std = cfg.doppler_std;
    }
    scan.targets.push_back(target);
    if (visible) visible->push_back(static_cast<int>(i));
  }
  return scan;
}

SimulatedPair make_pair(const SimConfig& cfg, int config_index, int run_index) {
  const auto c = static_cast<std::uint64_t>(config_index);
  const auto r = static_cast<std::uint64_t>(run_index);
  auto lm_rng = make_stream(cfg.seed, c, kSceneStream, kLandmarks);
  Landmarks landmarks = generate_landmarks(cfg, lm_rng);
  if (cfg.clustered()) {
    auto cl_rng = make_stream(cfg.seed, c, kSceneStream, kClusters);
    landmarks = apply_clustering(landmarks, cfg, cl_rng);
  }

  SimulatedPair pair;
  pair.config_index = config_index;
  pair.run_index = run_index;
  const bool doppler = cfg.doppler_std > 0.0 && cfg.dof() == Dof::TwoDoF;
  for (std::uint64_t attempt = 0;; ++attempt) {
    if (attempt > 1000) throw InvalidConfig("could not generate a pair with at least 3 targets per scan");
    auto tf_rng = make_stream(cfg.seed, c, r, kTransform + 16 * attempt);
    auto prev_rng = make_stream(cfg.seed, c, r, kPrevNoise + 16 * attempt);
    auto cur_rng = make_stream(cfg.seed, c, r, kCurNoise + 16 * attempt);
    pair.truth = sample_transform(cfg, tf_rng);
    std::vector<int> vis_prev, vis_cur;
    pair.prev = simulate_scan(landmarks, MotionState::identity(cfg.dof()), cfg, prev_rng, false, &vis_prev);
    pair.cur = simulate_scan(landmarks, pair.truth, cfg, cur_rng, doppler, &vis_cur);
    auto positive = [](const Scan& s) {
      return std::all_of(s.targets.begin(), s.targets.end(), [](const RadarTarget& t) { return t.range > 0.0; });
    };
    if (pair.prev.size() < 3 || pair.cur.size() < 3 || !positive(pair.prev) || !positive(pair.cur)) {
      ++pair.resamples;
      continue;
    }
    pair.prev.timestamp = 0.0;
    pair.cur.timestamp = cfg.dt;
    pair.correspondence_map.assign(vis_cur.size(), -1);
    for (std::size_t i = 0; i < vis_cur.size(); ++i) {
      const auto it = std::find(vis_prev.begin(), vis_prev.end(), vis_cur[i]);
      if (it != vis_prev.end()) pair.correspondence_map[i] = static_cast<int>(it - vis_prev.begin());
    }
    return pair;
  }
}

std::string to_string(Method m) {
  switch (m) {
    case Method::MSM: return "msm";
    case Method::SA: return "sa";
    case Method::MSM_D: return "msm-d";
    case Method::SA_D: return "sa-d";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (n == "msm") return Method::MSM;
  if (n == "sa") return Method::SA;
  if (n == "msm-d") return Method::MSM_D;
  if (n == "sa-d") return Method::SA_D;
  throw InvalidConfig("unknown method '" + name + "' (expected msm, sa, msm-d or sa-d)");
}

std::vector<Method> parse_methods(const std::string& csv) {
  std::vector<Method> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(method_from_string(item));
  if (out.empty()) throw InvalidConfig("no methods given");
  return out;
}

bool uses_doppler(Method m) { return m == Method::MSM_D || m == Method::SA_D; }

CorrespondenceCounts count_correspondences(const SimulatedPair& pair) {
  CorrespondenceCounts c;
  c.correspondences = static_cast<int>(
      std::count_if(pair.correspondence_map.begin(), pair.correspondence_map.end(), [](int j) { return j >= 0; }));
  c.cur_outliers = static_cast<int>(pair.cur.size()) - c.correspondences;
  c.prev_outliers = static_cast<int>(pair.prev.size()) - c.correspondences;
  return c;
}

RunResult run_single(const SimulatedPair& pair, Method method, const EstimatorConfig& base, const TimingInfo& timing) {
  RunResult res;
  res.method = method;
  res.scene = pair.config_index;
  res.run = pair.run_index;
  res.truth = pair.truth;
  res.counts = count_correspondences(pair);
  res.resamples = pair.resamples;
  EstimatorConfig cfg = base;
  cfg.use_doppler = uses_doppler(method);
  const auto start = std::chrono::steady_clock::now();
  try {
    if (method == Method::MSM || method == Method::MSM_D)
      res.estimate = register_scans(pair.prev, pair.cur, cfg, timing);
    else
      res.estimate = sa_register(pair.prev, pair.cur, cfg, timing);
  } catch (const Error& e) {
    res.failed = true;
    res.error = e.what();
    res.estimate = MotionState::identity(cfg.dof);
  }
  const auto stop = std::chrono::steady_clock::now();
  res.runtime_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  return res;
}

std::vector<RunResult> run_monte_carlo(const SimConfig& cfg, const std::vector<Method>& methods,
                                       const EstimatorConfig& base, int jobs) {
  validate(cfg);
  const auto runs = static_cast<std::size_t>(cfg.runs_per_configuration);
  const std::size_t pairs = static_cast<std::size_t>(cfg.num_configurations) * runs;
  const TimingInfo timing{cfg.dt, cfg.dt_std};
  std::vector<RunResult> out(pairs * methods.size());
  parallel_for(pairs, jobs, [&](std::size_t i) {
    const SimulatedPair pair = make_pair(cfg, static_cast<int>(i / runs), static_cast<int>(i % runs));
    for (std::size_t m = 0; m < methods.size(); ++m) out[i * methods.size() + m] = run_single(pair, methods[m], base, timing);
  });
  return out;
}

std::vector<RunResult> run_dataset(const std::vector<SimulatedPair>& pairs, const std::vector<Method>& methods,
                                   const EstimatorConfig& base, const TimingInfo& timing, int jobs) {
  std::vector<RunResult> out(pairs.size() * methods.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t i) {
    for (std::size_t m = 0; m < methods.size(); ++m)
      out[i * methods.size() + m] = run_single(pairs[i], methods[m], base, timing);
  });
  return out;
}

}  // namespace radego
