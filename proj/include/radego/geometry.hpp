#pragma once

#include "radego/types.hpp"

#include <Eigen/Core>

#include <cmath>
#include <numbers>

namespace radego {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Mat2 = Eigen::Matrix<Scalar, 2, 2>;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::remainder(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  return a;
}

/// Signed difference a - b on the circle, in (-pi, pi].
inline double angle_diff(double a, double b) { return wrap_angle(a - b); }

template <typename Scalar>
Mat2<Scalar> rotation(const Scalar& angle) {
  using std::cos;
  using std::sin;
  const Scalar c = cos(angle);
  const Scalar s = sin(angle);
  Mat2<Scalar> r;
  r << c, -s, s, c;
  return r;
}

/// Planar rigid transform parameterised on an arbitrary scalar (double or
/// autodiff); `t` has zero lateral part for TwoDoF states.
template <typename Scalar>
struct Pose2 {
  Vec2<Scalar> t = Vec2<Scalar>::Zero();
  Scalar theta = Scalar(0);

  Vec2<Scalar> operator*(const Vec2<Scalar>& p) const { return rotation(theta) * p + t; }
};

/// Builds a pose from the tangent vector [x, theta] or [x, y, theta].
template <typename Derived>
Pose2<typename Derived::Scalar> pose_from_tangent(Dof dof, const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  Pose2<Scalar> pose;
  if (dof == Dof::TwoDoF) {
    pose.t << x(0), Scalar(0);
    pose.theta = x(1);
  } else {
    pose.t << x(0), x(1);
    pose.theta = x(2);
  }
  return pose;
}

inline Pose2<double> to_pose(const MotionState& x) {
  Pose2<double> p;
  p.t = x.translation;
  if (x.dof == Dof::TwoDoF) p.t.y() = 0.0;
  p.theta = x.rotation;
  return p;
}

/// R(x_rot) p + x_tran.
inline Eigen::Vector2d apply_transform(const MotionState& x, const Eigen::Vector2d& p) {
  return to_pose(x) * p;
}

template <typename Scalar, typename Derived>
Mat2<Scalar> rotate_covariance(const Mat2<Scalar>& r, const Eigen::MatrixBase<Derived>& cov) {
  Mat2<Scalar> out = r * cov.template cast<Scalar>() * r.transpose();
  // exact symmetry, off-diagonals can drift by an ulp otherwise
  out(0, 1) = out(1, 0) = Scalar(0.5) * (out(0, 1) + out(1, 0));
  return out;
}

/// R Sigma R^T with R = R(x_rot).
inline Eigen::Matrix2d rotate_covariance(const MotionState& x, const Eigen::Matrix2d& cov) {
  return rotate_covariance(rotation(x.rotation), cov);
}

/// Polar to Cartesian with first-order covariance propagation.
CartesianTarget polar_to_cartesian(const RadarTarget& t);

/// Same as polar_to_cartesian followed by the sensor-to-vehicle mount
/// transform.
CartesianTarget to_vehicle_frame(const RadarTarget& t, const SensorMount& mount);

/// Mahalanobis-style whitening of a 2-vector against a 2x2 SPD matrix via its
/// lower Cholesky factor. Returns L^{-1} v and writes log det(S).
template <typename Scalar>
Vec2<Scalar> whiten(const Mat2<Scalar>& s, const Vec2<Scalar>& v, Scalar& log_det) {
  using std::log;
  using std::sqrt;
  const Scalar l00 = sqrt(s(0, 0));
  const Scalar l10 = s(1, 0) / l00;
  const Scalar l11 = sqrt(s(1, 1) - l10 * l10);
  log_det = Scalar(2) * (log(l00) + log(l11));
  Vec2<Scalar> w;
  w(0) = v(0) / l00;
  w(1) = (v(1) - l10 * w(0)) / l11;
  return w;
}

}  // namespace radego
