#pragma once

#include <Eigen/Core>
#include <unsupported/Eigen/AutoDiff>

namespace radego {

/// Forward-mode scalar carrying up to three partial derivatives on the stack.
using Jet = Eigen::AutoDiffScalar<Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>>;

inline double value_of(double x) { return x; }

template <typename DerType>
double value_of(const Eigen::AutoDiffScalar<DerType>& x) {
  return x.value();
}

/// Seeds a tangent vector for forward-mode differentiation.
inline Eigen::Matrix<Jet, Eigen::Dynamic, 1> seed(const Eigen::VectorXd& x) {
  const auto n = x.size();
  Eigen::Matrix<Jet, Eigen::Dynamic, 1> out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = Jet(x(i), n, i);
  return out;
}

/// Builds a constant Jet with an all-zero derivative vector of size n.
inline Jet constant(double v, Eigen::Index n) {
  return Jet(v, Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>::Zero(n));
}

inline Jet lift(double v, const Jet& like) { return constant(v, like.derivatives().size()); }
inline double lift(double v, double) { return v; }

}  // namespace radego
