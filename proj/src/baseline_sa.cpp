#include "radego/baseline_sa.hpp"

#include "radego/doppler.hpp"
#include "radego/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace radego {

SumApproximation::SumApproximation(const Scan& prev, const Scan& cur, Dof dof, bool use_doppler,
                                   const TimingInfo& timing)
    : dof_(dof), use_doppler_(use_doppler), timing_(timing), cur_mount_(cur.mount) {
  if (prev.empty()) throw EmptyModel("previous scan has no targets");
  if (cur.empty()) throw EmptyModel("current scan has no targets");
  if (use_doppler && dof != Dof::TwoDoF) throw UnsupportedDof("doppler factors require a 2DoF state");
  model_ = build_model_gmm(prev);
  targets_.reserve(cur.size());
  for (const auto& t : cur.targets) targets_.push_back(to_vehicle_frame(t, cur.mount));
  raw_ = cur.targets;
}

std::vector<double> SumApproximation::target_nll(const Eigen::VectorXd& x) const {
  const Pose2<double> pose = pose_from_tangent(dof_, x);
  const Eigen::Matrix2d rot = rotation(pose.theta);
  std::vector<double> nll(targets_.size());
  const MotionState state = MotionState::from_tangent(dof_, x);
  for (std::size_t i = 0; i < targets_.size(); ++i) {
    nll[i] = gmm_nll(model_, pose * targets_[i].mean, rotate_covariance(rot, targets_[i].covariance));
    if (use_doppler_ && raw_[i].has_doppler()) nll[i] += doppler_nll(state, raw_[i], cur_mount_, timing_);
  }
  return nll;
}

double SumApproximation::operator()(const Eigen::VectorXd& x) const {
  const std::vector<double> nll = target_nll(x);
  const double lo = *std::min_element(nll.begin(), nll.end());
  double sum = 0.0;
  for (double v : nll) sum += std::exp(lo - v);
  return lo - std::log(sum);
}

double sa_objective(const Scan& prev, const Scan& cur, const MotionState& x, bool use_doppler,
                    const TimingInfo& timing) {
  return SumApproximation(prev, cur, x.dof, use_doppler, timing)(x.tangent());
}

namespace {

Eigen::VectorXd wrap_tangent(Eigen::VectorXd x) {
  x(x.size() - 1) = wrap_angle(x(x.size() - 1));
  return x;
}

Eigen::VectorXd numeric_gradient(const SumApproximation& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd numeric_hessian(const SumApproximation& f, const Eigen::VectorXd& x, double h) {
  const auto n = x.size();
  Eigen::MatrixXd hess(n, n);
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    hess(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h * h);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Eigen::VectorXd pp = x, pm = x, mp = x, mm = x;
      pp(i) += h, pp(j) += h;
      pm(i) += h, pm(j) -= h;
      mp(i) -= h, mp(j) += h;
      mm(i) -= h, mm(j) -= h;
      hess(i, j) = hess(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
    }
  }
  return hess;
}

}  // namespace

MotionState sa_register(const Scan& prev, const Scan& cur, const EstimatorConfig& cfg, const TimingInfo& timing,
                        const std::optional<MotionState>& init) {
  const SumApproximation f(prev, cur, cfg.dof, cfg.use_doppler, timing);
  const int n = dimension(cfg.dof);
  Eigen::VectorXd x = init ? init->tangent() : Eigen::VectorXd::Zero(n);
  constexpr double grad_step = 1e-6;

  double fx = f(x);
  Eigen::VectorXd g = numeric_gradient(f, x, grad_step);
  Eigen::MatrixXd inv_h = Eigen::MatrixXd::Identity(n, n);
  bool first = true;
  bool converged = false;
  int iterations = 0;

  while (iterations < cfg.max_iters) {
    ++iterations;
    if (g.lpNorm<Eigen::Infinity>() < 1e-7) {
      converged = true;
      break;
    }
    Eigen::VectorXd dir = -inv_h * g;
    if (dir.dot(g) >= 0.0) {
      inv_h.setIdentity();
      dir = -g;
      first = true;
    }
    double step = 1.0;
    Eigen::VectorXd candidate;
    double f_new = fx;
    bool found = false;
    for (int k = 0; k < 40; ++k, step *= 0.5) {
      candidate = wrap_tangent(x + step * dir);
      f_new = f(candidate);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * g.dot(dir)) {
        found = true;
        break;
      }
    }
    if (!found) {
      converged = true;  // no further decrease along a descent direction
      break;
    }
    const Eigen::VectorXd s = step * dir;
    const Eigen::VectorXd g_new = numeric_gradient(f, candidate, grad_step);
    const Eigen::VectorXd y = g_new - g;
    const double df = fx - f_new;
    x = candidate;
    fx = f_new;
    g = g_new;
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      if (first) inv_h = (sy / y.squaredNorm()) * Eigen::MatrixXd::Identity(n, n);
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
      inv_h = (id - rho * s * y.transpose()) * inv_h * (id - rho * y * s.transpose()) + rho * s * s.transpose();
      first = false;
    }
    if (df < cfg.cost_tolerance * std::max(1.0, std::abs(fx)) || s.norm() < cfg.step_tolerance) {
      converged = true;
      break;
    }
  }

  MotionState out = MotionState::from_tangent(cfg.dof, x);
  out.iterations = iterations;
  out.converged = converged;
  out.cost = fx;

  const Eigen::MatrixXd hess = numeric_hessian(f, x, 1e-4);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess);
  if (eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 0.0) {
    out.covariance = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                     eig.eigenvectors().transpose();
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
    out.covariance_valid = true;
  } else {
    out.covariance = Eigen::MatrixXd::Constant(n, n, std::nan(""));
    out.covariance_valid = false;
  }
  return out;
}

}  // namespace radego
