#include "radego/geometry.hpp"
#include "radego/types.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace radego;
using std::numbers::pi;

namespace {

RadarTarget target(double r, double theta, double sr, double st) {
  RadarTarget t;
  t.range = r;
  t.azimuth = theta;
  t.range_std = sr;
  t.azimuth_std = st;
  return t;
}

MotionState state(double x, double y, double rot, Dof dof = Dof::ThreeDoF) {
  MotionState s = MotionState::identity(dof);
  s.translation << x, y;
  s.rotation = rot;
  return s;
}

Eigen::Matrix2d random_spd(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Matrix2d a;
  a << n(rng), n(rng), n(rng), n(rng);
  return a * a.transpose() + 0.1 * Eigen::Matrix2d::Identity();
}

}  // namespace

TEST_CASE("polar_to_cartesian on boresight") {
  const CartesianTarget c = polar_to_cartesian(target(1.0, 0.0, 0.1, 0.1));
  CHECK(c.mean.x() == doctest::Approx(1.0));
  CHECK(c.mean.y() == doctest::Approx(0.0));
  CHECK(c.covariance(0, 0) == doctest::Approx(0.01));
  CHECK(c.covariance(1, 1) == doctest::Approx(0.01));
  CHECK(std::abs(c.covariance(0, 1)) < 1e-15);
}

TEST_CASE("polar_to_cartesian at a quarter turn swaps the axes") {
  const CartesianTarget c = polar_to_cartesian(target(1.0, pi / 2, 0.1, 0.2));
  CHECK(std::abs(c.mean.x()) < 1e-15);
  CHECK(c.mean.y() == doctest::Approx(1.0));
  // range spread now lies along y, the angular spread along x
  CHECK(c.covariance(1, 1) == doctest::Approx(0.01));
  CHECK(c.covariance(0, 0) == doctest::Approx(0.04));
  CHECK(std::abs(c.covariance(0, 1)) < 1e-15);
}

TEST_CASE("polar_to_cartesian covariance matches Monte-Carlo propagation") {
  const double r = 5.0, th = 0.3, sr = 0.2, st = 0.05;
  const CartesianTarget c = polar_to_cartesian(target(r, th, sr, st));
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nr(0.0, sr), nt(0.0, st);
  const int n = 1000000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  Eigen::Matrix2d sq = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n; ++i) {
    const double rr = r + nr(rng), tt = th + nt(rng);
    const Eigen::Vector2d p(rr * std::cos(tt), rr * std::sin(tt));
    sum += p;
    sq += p * p.transpose();
  }
  const Eigen::Vector2d mean = sum / n;
  const Eigen::Matrix2d cov = (sq - n * mean * mean.transpose()) / (n - 1);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(std::abs(cov(i, j) - c.covariance(i, j)) <= 0.05 * std::abs(c.covariance(i, j)));
}

TEST_CASE("polar_to_cartesian agrees with Monte-Carlo for azimuth noise up to 5 degrees") {
  std::mt19937_64 rng(11);
  for (double st_deg : {1.0, 3.0, 5.0}) {
    const double r = 20.0, th = -0.7, sr = 0.2, st = st_deg * pi / 180.0;
    const CartesianTarget c = polar_to_cartesian(target(r, th, sr, st));
    std::normal_distribution<double> nr(0.0, sr), nt(0.0, st);
    const int n = 400000;
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    Eigen::Matrix2d sq = Eigen::Matrix2d::Zero();
    for (int i = 0; i < n; ++i) {
      const double rr = r + nr(rng), tt = th + nt(rng);
      const Eigen::Vector2d p(rr * std::cos(tt), rr * std::sin(tt));
      sum += p;
      sq += p * p.transpose();
    }
    const Eigen::Vector2d mean = sum / n;
    const Eigen::Matrix2d cov = (sq - n * mean * mean.transpose()) / (n - 1);
    CAPTURE(st_deg);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(std::abs(cov(i, j) - c.covariance(i, j)) <= 0.05 * std::abs(c.covariance(i, j)));
  }
}

TEST_CASE("radar target validation") {
  CHECK_NOTHROW(validate(target(1.0, 0.0, 0.1, 0.1)));
  CHECK_THROWS_AS(validate(target(0.0, 0.0, 0.1, 0.1)), InvalidInput);
  CHECK_THROWS_AS(validate(target(1.0, 0.0, 0.0, 0.1)), InvalidInput);
  CHECK_THROWS_AS(validate(target(1.0, 0.0, 0.1, -0.1)), InvalidInput);
  CHECK_THROWS_AS(polar_to_cartesian(target(std::nan(""), 0.0, 0.1, 0.1)), InvalidInput);
  CHECK_THROWS_AS(polar_to_cartesian(target(1.0, std::numeric_limits<double>::infinity(), 0.1, 0.1)), InvalidInput);

  RadarTarget t = target(1.0, 0.0, 0.1, 0.1);
  t.doppler = 1.0;
  CHECK_THROWS_AS(validate(t), InvalidInput);
  t.doppler_std = 0.0;
  CHECK_THROWS_AS(validate(t), InvalidInput);
  t.doppler_std = 0.3;
  CHECK_NOTHROW(validate(t));
}

TEST_CASE("apply_transform") {
  const Eigen::Vector2d p(3.0, 4.0);
  CHECK(apply_transform(MotionState::identity(Dof::ThreeDoF), p).isApprox(p));

  const Eigen::Vector2d q = apply_transform(state(0.0, 0.0, pi / 2), Eigen::Vector2d(1.0, 0.0));
  CHECK(std::abs(q.x()) < 1e-15);
  CHECK(q.y() == doctest::Approx(1.0));

  // R(0.1) (10, 0) + (0.2, 0) by hand
  const Eigen::Vector2d h = apply_transform(state(0.2, 0.0, 0.1, Dof::TwoDoF), Eigen::Vector2d(10.0, 0.0));
  CHECK(h.x() == doctest::Approx(10.0 * std::cos(0.1) + 0.2).epsilon(1e-14));
  CHECK(h.y() == doctest::Approx(10.0 * std::sin(0.1)).epsilon(1e-14));
}

TEST_CASE("2DoF states keep the lateral translation at zero") {
  Eigen::VectorXd x(2);
  x << 0.3, 0.2;
  const MotionState s = MotionState::from_tangent(Dof::TwoDoF, x);
  CHECK(s.translation.y() == 0.0);
  CHECK(s.tangent().isApprox(x));
  CHECK_THROWS_AS(MotionState::from_tangent(Dof::ThreeDoF, x), InvalidInput);
}

TEST_CASE("angles are wrapped to (-pi, pi]") {
  CHECK(wrap_angle(pi) == doctest::Approx(pi));
  CHECK(wrap_angle(-pi) == doctest::Approx(pi));
  CHECK(wrap_angle(3 * pi / 2) == doctest::Approx(-pi / 2));
  CHECK(angle_diff(pi - 0.1, -pi + 0.1) == doctest::Approx(-0.2));
  Eigen::Vector3d x(0.0, 0.0, 2 * pi + 0.5);
  CHECK(MotionState::from_tangent(Dof::ThreeDoF, x).rotation == doctest::Approx(0.5));
}

TEST_CASE("rotate_covariance examples") {
  const Eigen::Matrix2d iso = 2.5 * Eigen::Matrix2d::Identity();
  for (double a : {0.1, 1.0, -2.0, 3.0}) CHECK(rotate_covariance(state(0, 0, a), iso).isApprox(iso, 1e-14));

  Eigen::Matrix2d d = Eigen::Vector2d(1.0, 4.0).asDiagonal();
  const Eigen::Matrix2d swapped = rotate_covariance(state(0, 0, pi / 2), d);
  CHECK(swapped(0, 0) == doctest::Approx(4.0));
  CHECK(swapped(1, 1) == doctest::Approx(1.0));
  CHECK(std::abs(swapped(0, 1)) < 1e-14);
}

TEST_CASE("rotate_covariance preserves symmetry, eigenvalues, trace and determinant") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(-pi, pi);
  for (int k = 0; k < 200; ++k) {
    const Eigen::Matrix2d s = random_spd(rng);
    const double a = k == 0 ? 0.7 : ang(rng);
    const Eigen::Matrix2d r = rotate_covariance(state(0, 0, a), s);
    CHECK(r(0, 1) == r(1, 0));
    CHECK(std::abs(r.trace() - s.trace()) < 1e-12);
    CHECK(std::abs(r.determinant() - s.determinant()) < 1e-12);
    const Eigen::Vector2d e0 = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(s).eigenvalues();
    const Eigen::Vector2d e1 = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(r).eigenvalues();
    CHECK((e0 - e1).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(e1.minCoeff() > 0.0);
  }
}

TEST_CASE("sensor mount moves targets into the vehicle frame") {
  SensorMount m{1.0, 0.5, pi / 2};
  const CartesianTarget c = to_vehicle_frame(target(2.0, 0.0, 0.1, 0.2), m);
  CHECK(c.mean.x() == doctest::Approx(1.0));
  CHECK(c.mean.y() == doctest::Approx(2.5));
  CHECK(c.covariance(0, 0) == doctest::Approx(0.16));
  CHECK(c.covariance(1, 1) == doctest::Approx(0.01));
}
