#pragma once

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace radego {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class EmptyModel : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class UnsupportedDof : public Error {
 public:
  using Error::Error;
};

class MissingMeasurement : public Error {
 public:
  using Error::Error;
};

class DegenerateProblem : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// One polar detection in the sensor frame.
///
/// Doppler is the radial velocity reported by the sensor; positive means the
/// range is growing. `doppler_std` is present iff `doppler` is.
struct RadarTarget {
  double range = 1.0;
  double azimuth = 0.0;
  double range_std = 0.1;
  double azimuth_std = 0.01;
  std::optional<double> doppler;
  std::optional<double> doppler_std;

  bool has_doppler() const { return doppler.has_value(); }
};

/// Throws InvalidInput when the target violates its invariants.
void validate(const RadarTarget& t);

struct CartesianTarget {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();
};

struct SensorMount {
  double x_offset = 0.0;
  double y_offset = 0.0;
  double yaw_offset = 0.0;

  bool is_identity() const { return x_offset == 0.0 && y_offset == 0.0 && yaw_offset == 0.0; }
};

struct Scan {
  std::vector<RadarTarget> targets;
  double timestamp = 0.0;
  SensorMount mount;

  bool empty() const { return targets.empty(); }
  std::size_t size() const { return targets.size(); }
};

struct TimingInfo {
  double dt = 0.1;
  double dt_std = 0.005;
};

enum class Dof { TwoDoF = 2, ThreeDoF = 3 };

inline int dimension(Dof d) { return static_cast<int>(d); }

/// Planar motion estimate. For TwoDoF the lateral translation is held at 0.
struct MotionState {
  Dof dof = Dof::TwoDoF;
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();
  double rotation = 0.0;
  Eigen::MatrixXd covariance;
  int iterations = 0;
  bool converged = false;
  bool covariance_valid = false;
  double cost = 0.0;

  static MotionState identity(Dof dof);
  static MotionState from_tangent(Dof dof, const Eigen::VectorXd& x);

  /// [x, theta] for TwoDoF, [x, y, theta] for ThreeDoF.
  Eigen::VectorXd tangent() const;
  int dim() const { return dimension(dof); }
};

std::string to_string(Dof dof);

}  // namespace radego
