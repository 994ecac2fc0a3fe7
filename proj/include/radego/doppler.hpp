#pragma once

#include "radego/geometry.hpp"
#include "radego/types.hpp"

#include <cmath>

namespace radego {

// Doppler velocities are converted into a displacement over the scan
// interval: u = v * dt. The predicted displacement along the target's line of
// sight for a 2DoF motion (longitudinal translation, rotation) is
//
//   u_hat = (rot * y_S - tran) cos(theta + a_S) - rot * x_S sin(theta + a_S)
//
// so a vehicle moving forward sees stationary targets ahead approaching
// (negative range rate).

namespace detail {

template <typename Scalar>
Scalar doppler_prediction(const Scalar& tran, const Scalar& rot, double azimuth, const SensorMount& m) {
  using std::cos;
  using std::sin;
  const double phi = azimuth + m.yaw_offset;
  return (rot * m.y_offset - tran) * cos(phi) + (-rot * m.x_offset) * sin(phi);
}

/// d u_hat / d theta
template <typename Scalar>
Scalar doppler_prediction_slope(const Scalar& tran, const Scalar& rot, double azimuth, const SensorMount& m) {
  using std::cos;
  using std::sin;
  const double phi = azimuth + m.yaw_offset;
  return -(rot * m.y_offset - tran) * sin(phi) - rot * m.x_offset * cos(phi);
}

template <typename Scalar>
Scalar doppler_variance(const Scalar& tran, const Scalar& rot, const RadarTarget& t, const SensorMount& m,
                        const TimingInfo& timing) {
  const Scalar slope = doppler_prediction_slope(tran, rot, t.azimuth, m) * t.azimuth_std;
  const double dv = timing.dt * *t.doppler_std;
  const double dtv = *t.doppler * timing.dt_std;
  return slope * slope + Scalar(dv * dv + dtv * dtv);
}

template <typename Scalar>
Scalar doppler_residual(const Scalar& tran, const Scalar& rot, const RadarTarget& t, const SensorMount& m,
                        const TimingInfo& timing, double variance_scale = 1.0) {
  using std::sqrt;
  const Scalar u_hat = doppler_prediction(tran, rot, t.azimuth, m);
  const Scalar var = doppler_variance(tran, rot, t, m, timing) * variance_scale;
  return (u_hat - Scalar(*t.doppler * timing.dt)) / sqrt(var);
}

}  // namespace detail

/// Predicted Doppler displacement in meters. TwoDoF only.
double predicted_doppler_translation(const MotionState& x, double azimuth, const SensorMount& mount);

/// Azimuth-induced variance plus the propagated variance of v * dt, in m^2.
double doppler_variance(const MotionState& x, const RadarTarget& t, const SensorMount& mount,
                        const TimingInfo& timing);

/// (u_hat - v dt) / sqrt(variance).
double doppler_residual(const MotionState& x, const RadarTarget& t, const SensorMount& mount,
                        const TimingInfo& timing);

/// Negative log of the normalised Doppler displacement density.
double doppler_nll(const MotionState& x, const RadarTarget& t, const SensorMount& mount, const TimingInfo& timing);

}  // namespace radego
