#include "radego/mixture.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace radego {

namespace {

double log_s_of(const GaussianComponent& c, const Eigen::Matrix2d& point_cov) {
  const Eigen::Matrix2d s = point_cov + c.covariance;
  double log_det = 0.0;
  whiten<double>(s, Eigen::Vector2d::Zero(), log_det);
  return std::log(c.weight) - 0.5 * log_det;
}

}  // namespace

double MixtureModel::total_weight() const {
  double w = 0.0;
  for (const auto& c : components) w += c.weight;
  return w;
}

double MixtureModel::density(const Eigen::Vector2d& p) const {
  double sum = 0.0;
  for (const auto& c : components) {
    double log_det = 0.0;
    const Eigen::Vector2d w = whiten<double>(c.covariance, p - c.mean, log_det);
    sum += c.weight * std::exp(-0.5 * w.squaredNorm() - 0.5 * log_det) / (2.0 * std::numbers::pi);
  }
  return sum;
}

void validate(const OutlierConfig& cfg) {
  if (!(cfg.s_min > 0.0 && cfg.s_min < cfg.s_max)) throw InvalidConfig("outlier model needs 0 < s_min < s_max");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw InvalidConfig("outlier alpha must lie in (0, 1)");
  if (!(cfg.beta >= 1.0)) throw InvalidConfig("outlier beta must be >= 1");
  if (!(cfg.outlier_weight >= 0.0 && cfg.outlier_weight < 1.0))
    throw InvalidConfig("outlier weight must lie in [0, 1)");
  if (cfg.sigma_theta && !(*cfg.sigma_theta > 0.0 && *cfg.sigma_theta < std::numbers::pi / 2))
    throw InvalidConfig("outlier sigma_theta must lie in (0, pi/2)");
}

int outlier_component_count(const OutlierConfig& cfg) {
  validate(cfg);
  const double ba = cfg.beta * cfg.alpha;
  if (ba >= 1.0) return 0;
  const double ratio = (1.0 + ba) / (1.0 - ba);
  return static_cast<int>(std::ceil(std::log(cfg.s_max / cfg.s_min) / std::log(ratio))) + 1;
}

MixtureModel build_model_gmm(const Scan& model_scan) {
  if (model_scan.empty()) throw EmptyModel("model scan has no targets");
  MixtureModel m;
  m.components.reserve(model_scan.size());
  const double w = 1.0 / static_cast<double>(model_scan.size());
  for (const auto& t : model_scan.targets) {
    const CartesianTarget c = to_vehicle_frame(t, model_scan.mount);
    m.components.push_back({c.mean, c.covariance, w, false});
  }
  return m;
}

double l2_gaussian(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1, const Eigen::VectorXd& mu2,
                   const Eigen::MatrixXd& cov2) {
  const auto n = mu1.size();
  if (mu2.size() != n || cov1.rows() != n || cov1.cols() != n || cov2.rows() != n || cov2.cols() != n)
    throw InvalidInput("l2_gaussian dimension mismatch");
  const Eigen::MatrixXd s = cov1 + cov2;
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) throw NumericalError("l2_gaussian: summed covariance is not positive definite");
  const Eigen::VectorXd w = llt.matrixL().solve(mu1 - mu2);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double log_norm = -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) - 0.5 * log_det;
  return std::exp(log_norm - 0.5 * w.squaredNorm());
}

MixtureModel build_outlier_gmm(double fov_half_angle, const OutlierConfig& cfg) {
  validate(cfg);
  if (!(fov_half_angle > 0.0)) throw InvalidConfig("field of view half-angle must be positive");
  const double sigma_theta = cfg.sigma_theta.value_or(0.5 * fov_half_angle);
  if (!(sigma_theta < std::numbers::pi / 2))
    throw InvalidConfig("outlier lateral spread must stay below pi/2; set sigma_theta explicitly");
  const int count = outlier_component_count(cfg);
  if (count <= 0) throw InvalidConfig("outlier configuration yields no components (beta * alpha >= 1)");

  const double ratio = std::pow(cfg.s_max / cfg.s_min, 1.0 / static_cast<double>(count - 1));
  const double tan_theta = std::tan(sigma_theta);
  MixtureModel m;
  m.components.reserve(static_cast<std::size_t>(count));
  double x = cfg.s_min;
  double total = 0.0;
  for (int k = 0; k < count; ++k) {
    if (k == count - 1) x = cfg.s_max;
    const double sx = cfg.alpha * x;
    const double sy = x * tan_theta;
    GaussianComponent c;
    c.mean << x, 0.0;
    c.covariance = Eigen::Vector2d(sx * sx, sy * sy).asDiagonal();
    c.weight = sx * sy;  // sqrt(det Sigma_k)
    c.outlier = true;
    total += c.weight;
    m.components.push_back(c);
    x *= ratio;
  }
  for (auto& c : m.components) c.weight /= total;
  return m;
}

MixtureModel merge_models(const MixtureModel& inlier, const MixtureModel& outlier, double outlier_weight) {
  if (!(outlier_weight >= 0.0 && outlier_weight < 1.0)) throw InvalidConfig("outlier weight must lie in [0, 1)");
  if (inlier.empty()) throw EmptyModel("inlier mixture has no components");
  if (outlier_weight == 0.0) return inlier;
  MixtureModel m;
  m.components.reserve(inlier.size() + outlier.size());
  for (auto c : inlier.components) {
    c.weight *= 1.0 - outlier_weight;
    m.components.push_back(c);
  }
  for (auto c : outlier.components) {
    c.weight *= outlier_weight;
    c.outlier = true;
    m.components.push_back(c);
  }
  return m;
}

double gmm_nll(const MixtureModel& model, const Eigen::Vector2d& point, const Eigen::Matrix2d& point_cov) {
  if (model.empty()) throw EmptyModel("mixture has no components");
  if (!point.allFinite() || !point_cov.allFinite()) throw InvalidInput("gmm_nll: non-finite input");
  thread_local std::vector<double> log_l;
  log_l.resize(model.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < model.size(); ++j) {
    const auto& c = model.components[j];
    double log_det = 0.0;
    const Eigen::Vector2d w = whiten<double>(point_cov + c.covariance, point - c.mean, log_det);
    log_l[j] = std::log(c.weight) - 0.5 * log_det - 0.5 * w.squaredNorm();
    best = std::max(best, log_l[j]);
  }
  if (!std::isfinite(best)) throw NumericalError("gmm_nll: mixture evaluation is non-finite");
  double sum = 0.0;
  for (double v : log_l) sum += std::exp(v - best);
  return -(best + std::log(sum));
}

double msm_default_log_normalizer(const MixtureModel& model, const Eigen::Matrix2d& point_cov) {
  if (model.empty()) throw EmptyModel("mixture has no components");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : model.components) best = std::max(best, log_s_of(c, point_cov));
  return std::log(static_cast<double>(model.size())) + best;
}

double msm_rotation_invariant_log_normalizer(const MixtureModel& model, const Eigen::Matrix2d& point_cov) {
  if (model.empty()) throw EmptyModel("mixture has no components");
  const double root_det_point = std::sqrt(point_cov.determinant());
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : model.components) {
    const double bound = std::log(c.weight) - std::log(std::sqrt(c.covariance.determinant()) + root_det_point);
    best = std::max(best, bound);
  }
  return std::log(static_cast<double>(model.size())) + best;
}

MsmLinearization msm_linearize(const MixtureModel& model, const Eigen::Vector2d& point,
                               const Eigen::Matrix2d& point_cov, std::optional<double> log_normalizer) {
  if (!point.allFinite() || !point_cov.allFinite()) throw InvalidInput("msm_linearize: non-finite input");
  const double log_c = log_normalizer.value_or(msm_default_log_normalizer(model, point_cov));
  const auto terms = detail::msm_terms<double>(model, point, point_cov, log_c);
  MsmLinearization out;
  out.whitened = terms.residual.head<2>();
  out.correction = terms.residual(2);
  out.cost = 0.5 * terms.residual.squaredNorm();
  out.dominant = terms.dominant;
  out.log_normalizer = log_c;
  return out;
}

}  // namespace radego
