#include "radego/estimator.hpp"

#include "radego/autodiff.hpp"
#include "radego/doppler.hpp"
#include "radego/geometry.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace radego {

void validate(const EstimatorConfig& cfg) {
  if (!(cfg.warmstart_scale >= 1.0)) throw InvalidConfig("warmstart_scale must be >= 1");
  if (cfg.warmstart_max_iters < 0 || cfg.max_iters <= 0) throw InvalidConfig("iteration limits must be positive");
  if (!(cfg.cost_tolerance > 0.0 && cfg.step_tolerance > 0.0 && cfg.damping > 0.0))
    throw InvalidConfig("solver tolerances and damping must be positive");
  if (cfg.use_doppler && cfg.dof != Dof::TwoDoF) throw UnsupportedDof("doppler factors require a 2DoF state");
  if (cfg.outlier.outlier_weight > 0.0) validate(cfg.outlier);
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

SolverSummary levenberg_marquardt(const LeastSquaresProblem& problem, const Eigen::VectorXd& x0,
                                  const SolverOptions& opts) {
  SolverSummary out;
  out.x = x0;
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  problem.linearize(out.x, r, jac);
  double cost = 0.5 * r.squaredNorm();
  if (!std::isfinite(cost)) throw NumericalError("initial cost is non-finite");
  out.cost_history.push_back(cost);

  double lambda = opts.damping;
  const int n = problem.dim();
  while (out.iterations < opts.max_iters) {
    ++out.iterations;
    const Eigen::MatrixXd h = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd a = h;
      for (int i = 0; i < n; ++i) a(i, i) += lambda * std::max(h(i, i), 1e-9);
      const Eigen::VectorXd delta = a.ldlt().solve(-g);
      const Eigen::VectorXd candidate = problem.retract(out.x, delta);
      const double new_cost = problem.cost(candidate);
      if (std::isfinite(new_cost) && new_cost <= cost) {
        accepted = true;
        const double rel = (cost - new_cost) / std::max(cost, 1e-300);
        out.x = candidate;
        cost = new_cost;
        out.cost_history.push_back(cost);
        lambda = std::max(lambda * 0.1, 1e-12);
        if (rel < opts.cost_tolerance || delta.norm() < opts.step_tolerance) {
          out.converged = true;
          out.cost = cost;
          return out;
        }
        problem.linearize(out.x, r, jac);
      } else {
        lambda *= 10.0;
        if (lambda > 1e12) {
          // no descent at any damping: numerically stationary
          out.converged = true;
          out.cost = cost;
          return out;
        }
      }
    }
  }
  out.cost = cost;
  return out;
}

Eigen::MatrixXd estimate_covariance(const LeastSquaresProblem& problem, const Eigen::VectorXd& x) {
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  problem.linearize(x, r, jac);
  const Eigen::MatrixXd info = jac.transpose() * jac;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
  if (eig.info() != Eigen::Success) throw DegenerateProblem("information matrix eigen-decomposition failed");
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) throw DegenerateProblem("information matrix is singular or ill-conditioned");
  Eigen::MatrixXd cov = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                        eig.eigenvectors().transpose();
  return 0.5 * (cov + cov.transpose());
}

// ---------------------------------------------------------------------------
// Registration problem
// ---------------------------------------------------------------------------

template <typename Scalar>
void RegistrationProblem::evaluate(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x,
                                   Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& r) const {
  const Pose2<Scalar> pose = pose_from_tangent(dof_, x);
  const Mat2<Scalar> rot = rotation(pose.theta);
  r.resize(static_cast<Eigen::Index>(3 * spatial_.size() + doppler_.size()));
  Eigen::Index row = 0;
  for (const auto& term : spatial_) {
    const Vec2<Scalar> p = rot * term.mean.cast<Scalar>() + pose.t;
    const Mat2<Scalar> cov = rotate_covariance(rot, term.covariance);
    const auto msm = detail::msm_terms<Scalar>(model_, p, cov, term.log_normalizer);
    r.template segment<3>(row) = msm.residual;
    row += 3;
  }
  for (const auto& t : doppler_) {
    r(row++) = detail::doppler_residual(x(0), x(1), t, cur_mount_, timing_, doppler_variance_scale_);
  }
}

Eigen::VectorXd RegistrationProblem::residuals(const Eigen::VectorXd& x) const {
  Eigen::VectorXd r;
  evaluate<double>(x, r);
  return r;
}

void RegistrationProblem::linearize(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& jac) const {
  const auto xs = seed(x);
  Eigen::Matrix<Jet, Eigen::Dynamic, 1> rj;
  evaluate<Jet>(xs, rj);
  r.resize(rj.size());
  jac.setZero(rj.size(), x.size());
  for (Eigen::Index i = 0; i < rj.size(); ++i) {
    r(i) = rj(i).value();
    const auto& d = rj(i).derivatives();
    if (d.size() == x.size()) jac.row(i) = d.transpose();
  }
}

Eigen::VectorXd RegistrationProblem::retract(const Eigen::VectorXd& x, const Eigen::VectorXd& delta) const {
  Eigen::VectorXd out = x + delta;
  out(out.size() - 1) = wrap_angle(out(out.size() - 1));
  return out;
}

RegistrationProblem RegistrationProblem::scaled(double factor) const {
  RegistrationProblem p = *this;
  for (auto& c : p.model_.components)
    if (!c.outlier) c.covariance *= factor;
  for (auto& t : p.spatial_) {
    t.covariance *= factor;
    t.log_normalizer = msm_rotation_invariant_log_normalizer(p.model_, t.covariance);
  }
  p.doppler_variance_scale_ *= factor;
  return p;
}

std::vector<double> RegistrationProblem::term_costs(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd r = residuals(x);
  std::vector<double> out;
  out.reserve(spatial_.size() + doppler_.size());
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < spatial_.size(); ++i, row += 3) out.push_back(0.5 * r.segment<3>(row).squaredNorm());
  for (std::size_t i = 0; i < doppler_.size(); ++i, ++row) out.push_back(0.5 * r(row) * r(row));
  return out;
}

int RegistrationProblem::inlier_correspondences(const Eigen::VectorXd& x) const {
  const Pose2<double> pose = pose_from_tangent(dof_, x);
  const Eigen::Matrix2d rot = rotation(pose.theta);
  int count = 0;
  for (const auto& term : spatial_) {
    const auto msm = detail::msm_terms<double>(model_, pose * term.mean, rotate_covariance(rot, term.covariance),
                                               term.log_normalizer);
    if (!model_.components[msm.dominant].outlier) ++count;
  }
  return count;
}

namespace {

MixtureModel to_vehicle_frame(MixtureModel m, const SensorMount& mount) {
  if (mount.is_identity()) return m;
  const Eigen::Matrix2d r = rotation(mount.yaw_offset);
  const Eigen::Vector2d t(mount.x_offset, mount.y_offset);
  for (auto& c : m.components) {
    c.mean = r * c.mean + t;
    c.covariance = rotate_covariance(r, c.covariance);
  }
  return m;
}

}  // namespace

RegistrationProblem assemble_problem(const Scan& prev, const Scan& cur, const EstimatorConfig& cfg,
                                     const TimingInfo& timing) {
  validate(cfg);
  if (prev.empty()) throw EmptyModel("previous scan has no targets");
  if (cur.empty()) throw EmptyModel("current scan has no targets");

  RegistrationProblem p;
  p.dof_ = cfg.dof;
  p.cur_mount_ = cur.mount;
  p.timing_ = timing;

  const MixtureModel inlier = build_model_gmm(prev);
  if (cfg.outlier.outlier_weight > 0.0) {
    const MixtureModel outlier = to_vehicle_frame(build_outlier_gmm(cfg.fov_half_angle, cfg.outlier), prev.mount);
    p.model_ = merge_models(inlier, outlier, cfg.outlier.outlier_weight);
  } else {
    p.model_ = inlier;
  }

  p.spatial_.reserve(cur.size());
  for (const auto& t : cur.targets) {
    const CartesianTarget c = radego::to_vehicle_frame(t, cur.mount);
    p.spatial_.push_back({c.mean, c.covariance, msm_rotation_invariant_log_normalizer(p.model_, c.covariance)});
  }

  if (cfg.use_doppler) {
    if (!(timing.dt > 0.0) || !(timing.dt_std >= 0.0)) throw InvalidInput("timing needs dt > 0 and dt_std >= 0");
    for (const auto& t : cur.targets)
      if (t.has_doppler()) p.doppler_.push_back(t);
    if (p.doppler_.empty()) p.warnings_.push_back("doppler requested but no target carries doppler; spatial only");
  }
  return p;
}

MotionState optimize(const RegistrationProblem& problem, const MotionState& init, const EstimatorConfig& cfg) {
  if (init.dof != problem.dof()) throw InvalidInput("initial state dof does not match the problem");
  Eigen::VectorXd x = init.tangent();
  int iterations = 0;

  if (cfg.warmstart_scale > 1.0 && cfg.warmstart_max_iters > 0) {
    const RegistrationProblem warm = problem.scaled(cfg.warmstart_scale * cfg.warmstart_scale);
    SolverOptions opts{cfg.warmstart_max_iters, cfg.cost_tolerance, cfg.step_tolerance, cfg.damping};
    const SolverSummary s = levenberg_marquardt(warm, x, opts);
    x = s.x;
    iterations += s.iterations;
  }

  SolverOptions opts{cfg.max_iters, cfg.cost_tolerance, cfg.step_tolerance, cfg.damping};
  const SolverSummary s = levenberg_marquardt(problem, x, opts);
  MotionState out = MotionState::from_tangent(problem.dof(), s.x);
  out.iterations = iterations + s.iterations;
  out.converged = s.converged;
  out.cost = s.cost;
  return out;
}

MotionState register_scans(const Scan& prev, const Scan& cur, const EstimatorConfig& cfg, const TimingInfo& timing,
                           const std::optional<MotionState>& init) {
  const RegistrationProblem problem = assemble_problem(prev, cur, cfg, timing);
  MotionState state = optimize(problem, init.value_or(MotionState::identity(cfg.dof)), cfg);
  const Eigen::VectorXd x = state.tangent();
  if (problem.inlier_correspondences(x) < 2) state.converged = false;
  try {
    state.covariance = estimate_covariance(problem, x);
    state.covariance_valid = true;
  } catch (const DegenerateProblem&) {
    state.covariance = Eigen::MatrixXd::Constant(state.dim(), state.dim(), std::nan(""));
    state.covariance_valid = false;
    state.converged = false;
  }
  return state;
}

}  // namespace radego
