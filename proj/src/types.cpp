#include "radego/types.hpp"

#include "radego/geometry.hpp"

#include <cmath>

namespace radego {

void validate(const RadarTarget& t) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(t.range) || !finite(t.azimuth) || !finite(t.range_std) || !finite(t.azimuth_std))
    throw InvalidInput("radar target has non-finite fields");
  if (t.range <= 0.0) throw InvalidInput("radar target range must be positive");
  if (t.range_std <= 0.0 || t.azimuth_std <= 0.0)
    throw InvalidInput("radar target standard deviations must be positive");
  if (t.doppler.has_value() != t.doppler_std.has_value())
    throw InvalidInput("doppler and doppler_std must be given together");
  if (t.doppler) {
    if (!finite(*t.doppler) || !finite(*t.doppler_std))
      throw InvalidInput("radar target doppler is non-finite");
    if (*t.doppler_std <= 0.0) throw InvalidInput("doppler_std must be positive");
  }
}

MotionState MotionState::identity(Dof dof) {
  MotionState s;
  s.dof = dof;
  s.covariance = Eigen::MatrixXd::Zero(dimension(dof), dimension(dof));
  return s;
}

MotionState MotionState::from_tangent(Dof dof, const Eigen::VectorXd& x) {
  if (x.size() != dimension(dof)) throw InvalidInput("tangent vector size does not match dof");
  MotionState s = identity(dof);
  if (dof == Dof::TwoDoF) {
    s.translation << x(0), 0.0;
    s.rotation = wrap_angle(x(1));
  } else {
    s.translation << x(0), x(1);
    s.rotation = wrap_angle(x(2));
  }
  return s;
}

Eigen::VectorXd MotionState::tangent() const {
  Eigen::VectorXd x(dim());
  if (dof == Dof::TwoDoF)
    x << translation.x(), rotation;
  else
    x << translation.x(), translation.y(), rotation;
  return x;
}

std::string to_string(Dof dof) { return dof == Dof::TwoDoF ? "2dof" : "3dof"; }

CartesianTarget polar_to_cartesian(const RadarTarget& t) {
  validate(t);
  const double c = std::cos(t.azimuth);
  const double s = std::sin(t.azimuth);
  CartesianTarget out;
  out.mean << t.range * c, t.range * s;
  Eigen::Matrix2d jac;
  jac << c, -t.range * s, s, t.range * c;
  const Eigen::Vector2d var(t.range_std * t.range_std, t.azimuth_std * t.azimuth_std);
  out.covariance = jac * var.asDiagonal() * jac.transpose();
  out.covariance(0, 1) = out.covariance(1, 0);
  return out;
}

CartesianTarget to_vehicle_frame(const RadarTarget& t, const SensorMount& mount) {
  CartesianTarget c = polar_to_cartesian(t);
  if (mount.is_identity()) return c;
  const Eigen::Matrix2d r = rotation(mount.yaw_offset);
  c.mean = r * c.mean + Eigen::Vector2d(mount.x_offset, mount.y_offset);
  c.covariance = rotate_covariance(r, c.covariance);
  return c;
}

}  // namespace radego
