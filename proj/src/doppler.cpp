#include "radego/doppler.hpp"

#include <numbers>

namespace radego {

namespace {

void require_two_dof(const MotionState& x) {
  if (x.dof != Dof::TwoDoF) throw UnsupportedDof("doppler factors are defined for 2DoF states only");
}

void require_doppler(const RadarTarget& t) {
  if (!t.has_doppler() || !t.doppler_std) throw MissingMeasurement("target carries no doppler measurement");
}

}  // namespace

double predicted_doppler_translation(const MotionState& x, double azimuth, const SensorMount& mount) {
  require_two_dof(x);
  return detail::doppler_prediction(x.translation.x(), x.rotation, azimuth, mount);
}

double doppler_variance(const MotionState& x, const RadarTarget& t, const SensorMount& mount,
                        const TimingInfo& timing) {
  require_two_dof(x);
  require_doppler(t);
  return detail::doppler_variance(x.translation.x(), x.rotation, t, mount, timing);
}

double doppler_residual(const MotionState& x, const RadarTarget& t, const SensorMount& mount,
                        const TimingInfo& timing) {
  require_two_dof(x);
  require_doppler(t);
  return detail::doppler_residual(x.translation.x(), x.rotation, t, mount, timing);
}

double doppler_nll(const MotionState& x, const RadarTarget& t, const SensorMount& mount, const TimingInfo& timing) {
  const double r = doppler_residual(x, t, mount, timing);
  const double var = doppler_variance(x, t, mount, timing);
  return 0.5 * r * r + 0.5 * std::log(2.0 * std::numbers::pi * var);
}

}  // namespace radego
