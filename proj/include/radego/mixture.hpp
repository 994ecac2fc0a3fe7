#pragma once

#include "radego/autodiff.hpp"
#include "radego/geometry.hpp"
#include "radego/types.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace radego {

struct GaussianComponent {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();
  double weight = 1.0;
  bool outlier = false;
};

/// Weighted sum of planar Gaussians. Weights sum to one for every mixture
/// produced by the builders below.
struct MixtureModel {
  std::vector<GaussianComponent> components;

  std::size_t size() const { return components.size(); }
  bool empty() const { return components.empty(); }
  double total_weight() const;

  /// Normalised mixture density at `p`.
  double density(const Eigen::Vector2d& p) const;
};

/// Conic-ray outlier model along the sensor boresight.
///
/// Components are spaced geometrically between `s_min` and `s_max`; the
/// spacing never exceeds (1 + beta*alpha) / (1 - beta*alpha). `sigma_theta`
/// defaults to half of the field-of-view half-angle when unset.
struct OutlierConfig {
  double alpha = 0.25;
  double beta = 2.0;
  double s_min = 1.0;
  double s_max = 40.0;
  std::optional<double> sigma_theta;
  double outlier_weight = 0.25;
};

void validate(const OutlierConfig& cfg);

/// Number of outlier components for a configuration.
int outlier_component_count(const OutlierConfig& cfg);

MixtureModel build_model_gmm(const Scan& model_scan);

/// N(0; mu1 - mu2, S1 + S2) for Gaussians of any matching dimension.
double l2_gaussian(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1,
                   const Eigen::VectorXd& mu2, const Eigen::MatrixXd& cov2);

MixtureModel build_outlier_gmm(double fov_half_angle, const OutlierConfig& cfg);

/// Inlier mass scaled by (1 - w_o), outlier mass by w_o. With w_o == 0 the
/// inlier model is returned unchanged.
MixtureModel merge_models(const MixtureModel& inlier, const MixtureModel& outlier, double outlier_weight);

/// -log sum_j w_j det(S_j)^{-1/2} exp(-0.5 |p - mu_j|^2_{S_j}) with
/// S_j = Sigma_j + point_cov.
double gmm_nll(const MixtureModel& model, const Eigen::Vector2d& point, const Eigen::Matrix2d& point_cov);

struct MsmLinearization {
  Eigen::Vector2d whitened = Eigen::Vector2d::Zero();
  double correction = 0.0;
  double cost = 0.0;
  std::size_t dominant = 0;
  double log_normalizer = 0.0;
};

/// log(N * max_j s_j) for a given point covariance; the default normaliser.
double msm_default_log_normalizer(const MixtureModel& model, const Eigen::Matrix2d& point_cov);

/// Upper bound of log(N * max_j s_j) over all rotations of `point_cov`.
///
/// Uses det(A + B)^{1/2} >= det(A)^{1/2} + det(B)^{1/2}, which is invariant
/// to rotating B, so the MSM offset stays constant while the target
/// covariance is rotated with the state.
double msm_rotation_invariant_log_normalizer(const MixtureModel& model, const Eigen::Matrix2d& point_cov);

/// Max-Sum-Mixture split of the GMM negative log-likelihood.
///
/// 0.5 * (|whitened|^2 + correction^2) equals gmm_nll plus the normaliser.
MsmLinearization msm_linearize(const MixtureModel& model, const Eigen::Vector2d& point,
                               const Eigen::Matrix2d& point_cov,
                               std::optional<double> log_normalizer = std::nullopt);

namespace detail {

template <typename Scalar>
struct MsmTerms {
  Eigen::Matrix<Scalar, 3, 1> residual;
  std::size_t dominant = 0;
};

/// Scalar-generic MSM residual: [L_k^{-1}(p - mu_k); sqrt(2 d)].
template <typename Scalar>
MsmTerms<Scalar> msm_terms(const MixtureModel& model, const Vec2<Scalar>& point, const Mat2<Scalar>& point_cov,
                           double log_normalizer) {
  using std::exp;
  using std::log;
  using std::sqrt;
  const std::size_t n = model.size();
  if (n == 0) throw EmptyModel("mixture has no components");

  // log l_j = log w_j - 0.5 log det S_j - e_j
  thread_local std::vector<Scalar> log_l;
  thread_local std::vector<Scalar> log_s;
  thread_local std::vector<Scalar> energy;
  thread_local std::vector<Vec2<Scalar>> white;
  log_l.resize(n);
  log_s.resize(n);
  energy.resize(n);
  white.resize(n);

  std::size_t best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    const auto& c = model.components[j];
    Mat2<Scalar> s = point_cov;
    s(0, 0) += c.covariance(0, 0);
    s(0, 1) += c.covariance(0, 1);
    s(1, 0) += c.covariance(1, 0);
    s(1, 1) += c.covariance(1, 1);
    Vec2<Scalar> diff = point;
    diff(0) -= c.mean(0);
    diff(1) -= c.mean(1);
    Scalar log_det;
    white[j] = whiten(s, diff, log_det);
    energy[j] = Scalar(0.5) * white[j].squaredNorm();
    log_s[j] = Scalar(std::log(c.weight)) - Scalar(0.5) * log_det;
    log_l[j] = log_s[j] - energy[j];
    const double v = value_of(log_l[j]);
    if (v > best_val) {
      best_val = v;
      best = j;
    }
  }
  if (!std::isfinite(best_val)) throw NumericalError("mixture evaluation is non-finite");

  // log sum_j l_j / l_k, stabilised by the dominant term
  Scalar rel_sum = Scalar(0);
  for (std::size_t j = 0; j < n; ++j) rel_sum += exp(log_l[j] - log_l[best]);
  const Scalar lse_rel = log(rel_sum);
  Scalar d = (Scalar(log_normalizer) - log_s[best]) - lse_rel;

  MsmTerms<Scalar> out;
  out.dominant = best;
  out.residual(0) = white[best](0);
  out.residual(1) = white[best](1);
  if (value_of(d) <= 1e-14)
    out.residual(2) = lift(0.0, out.residual(0));
  else
    out.residual(2) = sqrt(Scalar(2) * d);
  return out;
}

}  // namespace detail
}  // namespace radego
