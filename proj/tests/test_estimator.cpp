#include "radego/doppler.hpp"
#include "radego/estimator.hpp"
#include "radego/evaluation.hpp"
#include "radego/simulation.hpp"

#include <doctest.h>

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>
#include <random>

using namespace radego;
using std::numbers::pi;

namespace {

// r(x) = A x - b, so J^T J = A^T A everywhere
class LinearProblem final : public LeastSquaresProblem {
 public:
  LinearProblem(Eigen::MatrixXd a, Eigen::VectorXd b) : a_(std::move(a)), b_(std::move(b)) {}
  int dim() const override { return static_cast<int>(a_.cols()); }
  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const override { return a_ * x - b_; }
  void linearize(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& jac) const override {
    r = residuals(x);
    jac = a_;
  }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
};

// Rosenbrock as residuals (10 (y - x^2), 1 - x)
class Rosenbrock final : public LeastSquaresProblem {
 public:
  int dim() const override { return 2; }
  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const override {
    return Eigen::Vector2d(10.0 * (x(1) - x(0) * x(0)), 1.0 - x(0));
  }
  void linearize(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& jac) const override {
    r = residuals(x);
    jac.resize(2, 2);
    jac << -20.0 * x(0), 10.0, -1.0, 0.0;
  }
};

RadarTarget target(double r, double theta, double sr, double st) {
  RadarTarget t;
  t.range = r;
  t.azimuth = theta;
  t.range_std = sr;
  t.azimuth_std = st;
  return t;
}

// noise-free data with reported standard deviations a tenth of the preset
SimConfig noise_free(Experiment e) {
  SimConfig cfg = preset(e);
  cfg.apply_noise = false;
  cfg.noise_r_std = 0.02;
  cfg.noise_theta_std = 0.3 * pi / 180.0;
  return cfg;
}

EstimatorConfig noise_free_estimator(const SimConfig& cfg) {
  EstimatorConfig e = estimator_defaults(cfg);
  e.warmstart_scale = 50.0;  // same warm-start spread as 5x the preset noise
  return e;
}

SimulatedPair pair_with_truth(const SimConfig& cfg, const MotionState& truth, std::uint64_t seed) {
  auto rng = make_stream(seed, 1, 2, 3);
  const Landmarks lm = generate_landmarks(cfg, rng);
  SimulatedPair p;
  p.truth = truth;
  p.prev = simulate_scan(lm, MotionState::identity(truth.dof), cfg, rng, false);
  p.cur = simulate_scan(lm, truth, cfg, rng, cfg.doppler_std > 0.0);
  return p;
}

Eigen::VectorXd numeric_jacobian_col(const LeastSquaresProblem& p, const Eigen::VectorXd& x, int i, double h) {
  Eigen::VectorXd xp = x, xm = x;
  xp(i) += h;
  xm(i) -= h;
  return (p.residuals(xp) - p.residuals(xm)) / (2.0 * h);
}

}  // namespace

TEST_CASE("Levenberg-Marquardt solves Rosenbrock") {
  const SolverSummary s = levenberg_marquardt(Rosenbrock{}, Eigen::Vector2d(-1.2, 1.0), {200, 1e-15, 1e-15, 1e-4});
  CHECK(s.converged);
  CHECK(std::abs(s.x(0) - 1.0) < 1e-6);
  CHECK(std::abs(s.x(1) - 1.0) < 1e-6);
  for (std::size_t i = 1; i < s.cost_history.size(); ++i) CHECK(s.cost_history[i] <= s.cost_history[i - 1]);
}

TEST_CASE("unit information gives identity covariance, duplication halves it") {
  const LinearProblem unit(Eigen::MatrixXd::Identity(3, 3), Eigen::Vector3d(1.0, 2.0, 3.0));
  CHECK(estimate_covariance(unit, Eigen::Vector3d::Zero()).isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-14));

  std::mt19937_64 rng(31);
  std::normal_distribution<double> n;
  Eigen::MatrixXd a(6, 3);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
  Eigen::MatrixXd twice(12, 3);
  twice << a, a;
  const Eigen::MatrixXd c1 = estimate_covariance(LinearProblem(a, Eigen::VectorXd::Zero(6)), Eigen::Vector3d::Zero());
  const Eigen::MatrixXd c2 = estimate_covariance(LinearProblem(twice, Eigen::VectorXd::Zero(12)), Eigen::Vector3d::Zero());
  CHECK(c2.isApprox(0.5 * c1, 1e-12));

  Eigen::MatrixXd rank_deficient(3, 3);
  rank_deficient << 1, 0, 0, 0, 1, 0, 0, 0, 0;
  CHECK_THROWS_AS(estimate_covariance(LinearProblem(rank_deficient, Eigen::VectorXd::Zero(3)), Eigen::Vector3d::Zero()),
                  DegenerateProblem);
  Eigen::MatrixXd ill = Eigen::MatrixXd::Identity(2, 2);
  ill(1, 1) = 1e-7;  // condition 1e14 on J^T J
  CHECK_THROWS_AS(estimate_covariance(LinearProblem(ill, Eigen::VectorXd::Zero(2)), Eigen::Vector2d::Zero()),
                  DegenerateProblem);
}

TEST_CASE("duplicating every registration factor halves the covariance") {
  const SimConfig cfg = preset(Experiment::SIM);
  const SimulatedPair p = make_pair(cfg, 0, 0);
  Scan doubled = p.cur;
  doubled.targets.insert(doubled.targets.end(), p.cur.targets.begin(), p.cur.targets.end());
  const EstimatorConfig est = estimator_defaults(cfg);
  const TimingInfo timing{cfg.dt, cfg.dt_std};
  const Eigen::VectorXd x = p.truth.tangent();
  const Eigen::MatrixXd c1 = estimate_covariance(assemble_problem(p.prev, p.cur, est, timing), x);
  const Eigen::MatrixXd c2 = estimate_covariance(assemble_problem(p.prev, doubled, est, timing), x);
  CHECK(c2.isApprox(0.5 * c1, 1e-10));
}

TEST_CASE("assembled cost is the sum of MSM and Doppler term costs") {
  SimConfig cfg = preset(Experiment::SIM);
  const SimulatedPair p = make_pair(cfg, 3, 4);
  EstimatorConfig est = estimator_defaults(cfg);
  est.use_doppler = true;
  const TimingInfo timing{cfg.dt, 0.005};
  const RegistrationProblem prob = assemble_problem(p.prev, p.cur, est, timing);
  REQUIRE(prob.doppler_terms() == p.cur.size());

  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    Eigen::VectorXd x(2);
    x << 0.3 * u(rng), 0.3 * u(rng);
    const MotionState s = MotionState::from_tangent(Dof::TwoDoF, x);
    const Eigen::Matrix2d rot = rotation(s.rotation);
    double expected = 0.0;
    for (const auto& term : prob.spatial_terms())
      expected += msm_linearize(prob.model(), apply_transform(s, term.mean), rot * term.covariance * rot.transpose(),
                                term.log_normalizer)
                      .cost;
    for (const auto& t : p.cur.targets) {
      const double r = doppler_residual(s, t, p.cur.mount, timing);
      expected += 0.5 * r * r;
    }
    CHECK(std::abs(prob.cost(x) - expected) <= 1e-10 * std::max(1.0, expected));
  }
}

TEST_CASE("assemble_problem input handling") {
  const SimConfig cfg = preset(Experiment::SIM);
  SimulatedPair p = make_pair(cfg, 0, 1);
  EstimatorConfig est = estimator_defaults(cfg);
  const TimingInfo timing{cfg.dt, cfg.dt_std};
  CHECK_THROWS_AS(assemble_problem(Scan{}, p.cur, est, timing), EmptyModel);
  CHECK_THROWS_AS(assemble_problem(p.prev, Scan{}, est, timing), EmptyModel);

  est.use_doppler = true;
  for (auto& t : p.cur.targets) {
    t.doppler.reset();
    t.doppler_std.reset();
  }
  const RegistrationProblem prob = assemble_problem(p.prev, p.cur, est, timing);
  CHECK(prob.doppler_terms() == 0);
  REQUIRE(prob.warnings().size() == 1);
  CHECK(prob.warnings()[0].find("doppler") != std::string::npos);

  est.dof = Dof::ThreeDoF;
  CHECK_THROWS_AS(assemble_problem(p.prev, p.cur, est, timing), UnsupportedDof);
}

TEST_CASE("the outlier model absorbs a gross outlier") {
  const SimConfig cfg = preset(Experiment::SIM);
  SimulatedPair p = make_pair(cfg, 1, 0);
  p.cur.targets.push_back(target(30.0, 0.5, 0.2, 3.0 * pi / 180.0));
  EstimatorConfig with = estimator_defaults(cfg);
  EstimatorConfig without = with;
  without.outlier.outlier_weight = 0.0;
  const TimingInfo timing{cfg.dt, cfg.dt_std};
  const Eigen::VectorXd x = p.truth.tangent();
  // compare negative log-likelihoods: costs minus their normalisers
  auto nll = [&](const EstimatorConfig& e) {
    const RegistrationProblem prob = assemble_problem(p.prev, p.cur, e, timing);
    const auto costs = prob.term_costs(x);
    double sum = 0.0;
    for (std::size_t i = 0; i < prob.spatial_terms().size(); ++i) sum += costs[i] - prob.spatial_terms()[i].log_normalizer;
    return sum;
  };
  CHECK(nll(without) > nll(with));
}

TEST_CASE("self-registration is stationary at zero") {
  Scan s;
  for (int i = 0; i < 12; ++i) s.targets.push_back(target(4.0 + 2.5 * i, -0.8 + 0.14 * i, 0.05, 0.005));
  for (Dof dof : {Dof::TwoDoF, Dof::ThreeDoF}) {
    EstimatorConfig est;
    est.dof = dof;
    est.outlier.outlier_weight = 0.0;  // the broad outlier components are not symmetric about a target
    const RegistrationProblem prob = assemble_problem(s, s, est, {});
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    prob.linearize(Eigen::VectorXd::Zero(dimension(dof)), r, jac);
    CHECK((jac.transpose() * r).norm() < 1e-6);
  }
}

TEST_CASE("registration Jacobians match central differences") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Experiment e : {Experiment::SIM, Experiment::PSR}) {
    const SimConfig cfg = preset(e);
    EstimatorConfig est = estimator_defaults(cfg);
    est.use_doppler = e == Experiment::SIM;
    const TimingInfo timing{cfg.dt, 0.005};
    int checked = 0;
    for (int k = 0; k < 100; ++k) {
      const SimulatedPair p = make_pair(cfg, k % 7, k);
      const RegistrationProblem prob = assemble_problem(p.prev, p.cur, est, timing);
      Eigen::VectorXd x = p.truth.tangent();
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += 0.05 * u(rng);
      Eigen::VectorXd r;
      Eigen::MatrixXd jac;
      prob.linearize(x, r, jac);
      CHECK(r.isApprox(prob.residuals(x)));
      for (int i = 0; i < prob.dim(); ++i) {
        const Eigen::VectorXd fd = numeric_jacobian_col(prob, x, i, 1e-6);
        for (Eigen::Index row = 0; row < r.size(); ++row) {
          const double tol = 1e-5 * std::max(1.0, std::abs(fd(row)));
          if (std::abs(jac(row, i) - fd(row)) > tol) {
            // a dominant-component switch inside the stencil makes the difference meaningless
            const Eigen::VectorXd fd2 = numeric_jacobian_col(prob, x, i, 1e-7);
            CHECK(std::abs(jac(row, i) - fd2(row)) <= 1e-5 * std::max(1.0, std::abs(fd2(row))));
          }
          ++checked;
        }
      }
    }
    CHECK(checked > 1000);
  }
}

TEST_CASE("noise-free recovery") {
  SUBCASE("identity") {
    const SimConfig cfg = noise_free(Experiment::SIM);
    const SimulatedPair p = pair_with_truth(cfg, MotionState::identity(Dof::TwoDoF), 41);
    const MotionState s = register_scans(p.prev, p.cur, noise_free_estimator(cfg), {cfg.dt, cfg.dt_std});
    CHECK(s.converged);
    CHECK(std::abs(s.translation.x()) < 1e-6);
    CHECK(std::abs(s.rotation) < 1e-6);
  }
  SUBCASE("0.2 m and 5 degrees with 20 landmarks") {
    const SimConfig cfg = noise_free(Experiment::SIM);
    MotionState truth = MotionState::identity(Dof::TwoDoF);
    truth.translation.x() = 0.2;
    truth.rotation = 5.0 * pi / 180.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const SimulatedPair p = pair_with_truth(cfg, truth, seed);
      const MotionState s = register_scans(p.prev, p.cur, noise_free_estimator(cfg), {cfg.dt, cfg.dt_std});
      CAPTURE(seed);
      CHECK(std::abs(s.translation.x() - 0.2) < 1e-4);
      CHECK(std::abs(angle_diff(s.rotation, truth.rotation)) < 1e-4);
    }
  }
}

TEST_CASE("registration of Sim pairs") {
  SimConfig cfg = preset(Experiment::SIM);
  cfg.num_configurations = 10;
  cfg.runs_per_configuration = 100;
  const EstimatorConfig est = estimator_defaults(cfg);
  const TimingInfo timing{cfg.dt, cfg.dt_std};

  std::vector<Eigen::Vector2d> errors;
  Eigen::Matrix2d mean_cov = Eigen::Matrix2d::Zero();
  double iterations = 0.0;
  for (int c = 0; c < cfg.num_configurations; ++c) {
    for (int r = 0; r < cfg.runs_per_configuration; ++r) {
      const SimulatedPair p = make_pair(cfg, c, r);
      const RegistrationProblem prob = assemble_problem(p.prev, p.cur, est, timing);
      const MotionState s = register_scans(p.prev, p.cur, est, timing);
      REQUIRE(s.converged);
      REQUIRE(s.covariance_valid);
      CHECK((s.covariance - s.covariance.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * s.covariance.norm());
      CHECK(Eigen::LLT<Eigen::MatrixXd>(s.covariance).info() == Eigen::Success);

      // refinement from the warm-start result never increases the cost
      const SolverSummary phase2 = levenberg_marquardt(prob, s.tangent(), {20, 1e-12, 1e-12, 1e-4});
      for (std::size_t i = 1; i < phase2.cost_history.size(); ++i)
        CHECK(phase2.cost_history[i] <= phase2.cost_history[i - 1]);

      const PoseError e = pose_error(s, p.truth);
      errors.emplace_back(e.translation.x(), e.rotation);
      mean_cov += s.covariance;
      iterations += s.iterations;
    }
  }
  const double n = static_cast<double>(errors.size());
  mean_cov /= n;
  Eigen::Matrix2d sample = Eigen::Matrix2d::Zero();
  for (const auto& e : errors) sample += e * e.transpose();
  sample /= n;
  // reported covariance agrees with the spread of the errors
  for (int i = 0; i < 2; ++i) {
    CAPTURE(i);
    CHECK(std::abs(sample(i, i) - mean_cov(i, i)) <= 0.25 * mean_cov(i, i));
  }
  const double avg_iters = iterations / n;
  CHECK(avg_iters >= 2.0);
  CHECK(avg_iters <= 12.0);
}

TEST_CASE("30 percent random outliers leave the accuracy within 3x") {
  SimConfig cfg = preset(Experiment::SIM);
  const EstimatorConfig est = estimator_defaults(cfg);
  const TimingInfo timing{cfg.dt, cfg.dt_std};
  std::mt19937_64 rng(34);
  std::uniform_real_distribution<double> range(cfg.range_min, cfg.range_max), az(-*cfg.fov_half_angle, *cfg.fov_half_angle);
  double clean = 0.0, dirty = 0.0;
  const int runs = 200;
  for (int k = 0; k < runs; ++k) {
    const SimulatedPair p = make_pair(cfg, k % 10, k);
    Scan cur = p.cur;
    const int extra = static_cast<int>(std::lround(0.3 * static_cast<double>(cur.size()) / 0.7));
    for (int i = 0; i < extra; ++i) cur.targets.push_back(target(range(rng), az(rng), cfg.noise_r_std, cfg.noise_theta_std));
    clean += std::pow(register_scans(p.prev, p.cur, est, timing).translation.x() - p.truth.translation.x(), 2);
    dirty += std::pow(register_scans(p.prev, cur, est, timing).translation.x() - p.truth.translation.x(), 2);
  }
  const double rc = std::sqrt(clean / runs), rd = std::sqrt(dirty / runs);
  CAPTURE(rc);
  CAPTURE(rd);
  CHECK(rd < 3.0 * rc);
}

TEST_CASE("degenerate geometry is reported as not converged") {
  Scan one;
  one.targets.push_back(target(10.0, 0.1, 0.2, 0.05));
  for (Dof dof : {Dof::TwoDoF, Dof::ThreeDoF}) {
    EstimatorConfig est;
    est.dof = dof;
    const MotionState s = register_scans(one, one, est, {});
    CHECK_FALSE(s.converged);
  }
  // two targets at the same spot carry no rotation information in 3DoF
  Scan same;
  same.targets.push_back(target(10.0, 0.1, 0.2, 0.05));
  same.targets.push_back(target(10.0, 0.1, 0.2, 0.05));
  EstimatorConfig est;
  est.dof = Dof::ThreeDoF;
  const MotionState s = register_scans(same, same, est, {});
  CHECK_FALSE(s.converged);
  CHECK_FALSE(s.covariance_valid);
}

TEST_CASE("estimator config validation") {
  EstimatorConfig e;
  CHECK_NOTHROW(validate(e));
  e.warmstart_scale = 0.5;
  CHECK_THROWS_AS(validate(e), InvalidConfig);
  e = EstimatorConfig{};
  e.damping = 0.0;
  CHECK_THROWS_AS(validate(e), InvalidConfig);
  e = EstimatorConfig{};
  e.use_doppler = true;
  e.dof = Dof::ThreeDoF;
  CHECK_THROWS_AS(validate(e), UnsupportedDof);
}
