#pragma once

#include "radego/estimator.hpp"
#include "radego/parallel.hpp"
#include "radego/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace radego {

enum class Experiment { PSR, PSR_C, SIM, SIM_C };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& name);

/// Monte-Carlo generator settings. Angles in radians, distances in meters.
struct SimConfig {
  Experiment experiment = Experiment::SIM;
  int num_configurations = 50;
  int num_landmarks = 20;
  double range_min = 2.0;
  double range_max = 38.0;
  double azimuth_min = -55.0 * std::numbers::pi / 180.0;
  double azimuth_max = 55.0 * std::numbers::pi / 180.0;
  double cluster_fraction = 0.0;
  int cluster_size = 3;
  double cluster_spread_std = 0.1;
  int runs_per_configuration = 500;
  double trans_x_min = -0.25;
  double trans_x_max = 0.25;
  double trans_y_min = 0.0;
  double trans_y_max = 0.0;
  double rot_min = -15.0 * std::numbers::pi / 180.0;
  double rot_max = 15.0 * std::numbers::pi / 180.0;
  double noise_r_std = 0.2;
  double noise_theta_std = 3.0 * std::numbers::pi / 180.0;
  /// Zero disables Doppler simulation.
  double doppler_std = 0.3;
  /// Unset means an unrestricted 360 degree sensor.
  std::optional<double> fov_half_angle = 55.0 * std::numbers::pi / 180.0;
  double dt = 0.1;
  /// Reported timing uncertainty; simulated intervals are exact.
  double dt_std = 0.0;
  /// When false, noise standard deviations are reported but not applied.
  bool apply_noise = true;
  std::uint64_t seed = 1;

  Dof dof() const;
  bool clustered() const { return cluster_fraction > 0.0; }
};

void validate(const SimConfig& cfg);

/// Reference settings for each experiment.
SimConfig preset(Experiment e);
/// Scales the runs per configuration (at least one run).
SimConfig scaled(SimConfig cfg, double scale);
/// Estimator settings matched to a simulated sensor.
EstimatorConfig estimator_defaults(const SimConfig& cfg);

/// Deterministic RNG stream keyed by the seed and up to three indices.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c);

using Landmarks = std::vector<Eigen::Vector2d>;

Landmarks generate_landmarks(const SimConfig& cfg, std::mt19937_64& rng);
Landmarks apply_clustering(const Landmarks& landmarks, const SimConfig& cfg, std::mt19937_64& rng);
MotionState sample_transform(const SimConfig& cfg, std::mt19937_64& rng);

/// Observes `landmarks` from a sensor at `pose` (cur-to-prev transform).
/// `visible`, when given, receives the landmark index of every target.
Scan simulate_scan(const Landmarks& landmarks, const MotionState& pose, const SimConfig& cfg, std::mt19937_64& rng,
                   bool with_doppler, std::vector<int>* visible = nullptr);

struct SimulatedPair {
  Scan prev;
  Scan cur;
  MotionState truth;
  /// For each current target: index of the corresponding previous target, or -1.
  std::vector<int> correspondence_map;
  int resamples = 0;
  int config_index = 0;
  int run_index = 0;
};

/// Builds pair (config_index, run_index); identical for any call order.
SimulatedPair make_pair(const SimConfig& cfg, int config_index, int run_index);

enum class Method { MSM, SA, MSM_D, SA_D };

std::string to_string(Method m);
Method method_from_string(const std::string& name);
std::vector<Method> parse_methods(const std::string& csv);
bool uses_doppler(Method m);

struct CorrespondenceCounts {
  int correspondences = 0;
  int cur_outliers = 0;
  int prev_outliers = 0;
};

struct RunResult {
  Method method = Method::MSM;
  int scene = 0;
  int run = 0;
  MotionState truth;
  MotionState estimate;
  double runtime_ms = 0.0;
  bool failed = false;
  std::string error;
  CorrespondenceCounts counts;
  int resamples = 0;
};

CorrespondenceCounts count_correspondences(const SimulatedPair& pair);

/// Registers one pair with the given method.
RunResult run_single(const SimulatedPair& pair, Method method, const EstimatorConfig& base, const TimingInfo& timing);

/// Every configuration x run x method, ordered by (configuration, run,
/// method). Results do not depend on `jobs`.
std::vector<RunResult> run_monte_carlo(const SimConfig& cfg, const std::vector<Method>& methods,
                                       const EstimatorConfig& base, int jobs);

/// Same as run_monte_carlo over an already generated dataset.
std::vector<RunResult> run_dataset(const std::vector<SimulatedPair>& pairs, const std::vector<Method>& methods,
                                   const EstimatorConfig& base, const TimingInfo& timing, int jobs);

}  // namespace radego
