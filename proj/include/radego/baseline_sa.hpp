#pragma once

#include "radego/estimator.hpp"
#include "radego/mixture.hpp"
#include "radego/types.hpp"

#include <Eigen/Core>

#include <vector>

namespace radego {

/// Summing-approximation objective: -log sum_i P(m_i | F, x) [P(v_i | x)].
///
/// Uses the inlier model of the previous scan only; the sum itself supplies
/// the robustness that the product form has to get from an outlier model.
class SumApproximation {
 public:
  SumApproximation(const Scan& prev, const Scan& cur, Dof dof, bool use_doppler, const TimingInfo& timing);

  double operator()(const Eigen::VectorXd& x) const;
  /// Per-target negative log-likelihoods at `x`.
  std::vector<double> target_nll(const Eigen::VectorXd& x) const;

  Dof dof() const { return dof_; }

 private:
  Dof dof_;
  bool use_doppler_;
  TimingInfo timing_;
  SensorMount cur_mount_;
  MixtureModel model_;
  std::vector<CartesianTarget> targets_;
  std::vector<RadarTarget> raw_;
};

double sa_objective(const Scan& prev, const Scan& cur, const MotionState& x, bool use_doppler,
                    const TimingInfo& timing);

/// BFGS with central-difference gradients from zero (or `init`), covariance
/// from the inverse of a numeric Hessian. An indefinite Hessian leaves
/// covariance_valid=false.
MotionState sa_register(const Scan& prev, const Scan& cur, const EstimatorConfig& cfg, const TimingInfo& timing,
                        const std::optional<MotionState>& init = std::nullopt);

}  // namespace radego
