#pragma once

#include "radego/mixture.hpp"
#include "radego/types.hpp"

#include <Eigen/Core>

#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace radego {

struct EstimatorConfig {
  Dof dof = Dof::TwoDoF;
  bool use_doppler = false;
  OutlierConfig outlier;
  /// Sensor field-of-view half-angle; shapes the outlier model.
  double fov_half_angle = 55.0 * std::numbers::pi / 180.0;
  /// Standard deviations are multiplied by this factor during the warm start.
  double warmstart_scale = 5.0;
  int warmstart_max_iters = 5;
  int max_iters = 100;
  double cost_tolerance = 1e-9;
  double step_tolerance = 1e-9;
  double damping = 1e-4;
};

void validate(const EstimatorConfig& cfg);

/// Whitened nonlinear least-squares problem: cost(x) = 0.5 |r(x)|^2.
class LeastSquaresProblem {
 public:
  virtual ~LeastSquaresProblem() = default;

  virtual int dim() const = 0;
  virtual Eigen::VectorXd residuals(const Eigen::VectorXd& x) const = 0;
  /// Residuals and their Jacobian at `x`.
  virtual void linearize(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& jac) const = 0;
  /// Applies an increment; the default is plain addition.
  virtual Eigen::VectorXd retract(const Eigen::VectorXd& x, const Eigen::VectorXd& delta) const { return x + delta; }

  double cost(const Eigen::VectorXd& x) const { return 0.5 * residuals(x).squaredNorm(); }
};

struct SolverOptions {
  int max_iters = 100;
  double cost_tolerance = 1e-9;
  double step_tolerance = 1e-9;
  double damping = 1e-4;
};

struct SolverSummary {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
  double cost = 0.0;
  /// Cost after each accepted step, starting with the initial cost.
  std::vector<double> cost_history;
};

SolverSummary levenberg_marquardt(const LeastSquaresProblem& problem, const Eigen::VectorXd& x0,
                                  const SolverOptions& opts);

/// (J^T J)^{-1} at `x`. Throws DegenerateProblem when the information matrix
/// is singular or its condition number exceeds 1e12.
Eigen::MatrixXd estimate_covariance(const LeastSquaresProblem& problem, const Eigen::VectorXd& x);

/// Spatial MSM factors (one per current target) against the merged model of
/// the previous scan, plus optional Doppler factors.
class RegistrationProblem final : public LeastSquaresProblem {
 public:
  struct SpatialTerm {
    Eigen::Vector2d mean;
    Eigen::Matrix2d covariance;
    double log_normalizer = 0.0;
  };

  int dim() const override { return dimension(dof_); }
  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const override;
  void linearize(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& jac) const override;
  Eigen::VectorXd retract(const Eigen::VectorXd& x, const Eigen::VectorXd& delta) const override;

  /// Copy with every measurement covariance multiplied by `factor`; outlier
  /// components keep their shape.
  RegistrationProblem scaled(double factor) const;

  /// Per-term costs at `x`: spatial terms first, then Doppler terms.
  std::vector<double> term_costs(const Eigen::VectorXd& x) const;

  /// Number of spatial terms whose dominant component is an inlier.
  int inlier_correspondences(const Eigen::VectorXd& x) const;

  Dof dof() const { return dof_; }
  const MixtureModel& model() const { return model_; }
  const std::vector<SpatialTerm>& spatial_terms() const { return spatial_; }
  std::size_t doppler_terms() const { return doppler_.size(); }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  friend RegistrationProblem assemble_problem(const Scan&, const Scan&, const EstimatorConfig&, const TimingInfo&);

  template <typename Scalar>
  void evaluate(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& r) const;

  Dof dof_ = Dof::TwoDoF;
  MixtureModel model_;
  std::vector<SpatialTerm> spatial_;
  std::vector<RadarTarget> doppler_;
  SensorMount cur_mount_;
  TimingInfo timing_;
  double doppler_variance_scale_ = 1.0;
  std::vector<std::string> warnings_;
};

RegistrationProblem assemble_problem(const Scan& prev, const Scan& cur, const EstimatorConfig& cfg,
                                     const TimingInfo& timing);

/// Warm start with inflated covariances, then refinement with the true ones.
MotionState optimize(const RegistrationProblem& problem, const MotionState& init, const EstimatorConfig& cfg);

/// Full pipeline from zero (or caller-supplied) initialisation, with the
/// covariance attached. Degenerate problems come back with converged=false.
MotionState register_scans(const Scan& prev, const Scan& cur, const EstimatorConfig& cfg, const TimingInfo& timing,
                           const std::optional<MotionState>& init = std::nullopt);

}  // namespace radego
