#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the integrator, certificate, or gradient code paths under test.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <vector>

namespace oracles {

/// Matrix exponential by scaling-and-squaring with a Taylor core.
inline Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();  // infinity norm
  int squarings = 0;
  double scale = 1.0;
  while (norm * scale > 0.5) {
    scale *= 0.5;
    ++squarings;
  }
  const Eigen::MatrixXd a_scaled = a * scale;
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 24; ++k) {
    term = term * a_scaled / static_cast<double>(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

/// Fixed-time controllability Gramian int_0^T e^{At} B B' e^{A't} dt by
/// composite Simpson quadrature.
inline Eigen::MatrixXd controllability_gramian(const Eigen::MatrixXd& a,
                                               const Eigen::VectorXd& b, double t_final,
                                               int intervals = 400) {
  if (intervals % 2 == 1) ++intervals;
  const double h = t_final / intervals;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(a.rows(), a.rows());
  for (int k = 0; k <= intervals; ++k) {
    const Eigen::VectorXd v = expm(a * (k * h)) * b;
    const double weight = (k == 0 || k == intervals) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    gram += weight * v * v.transpose();
  }
  return gram * (h / 3.0);
}

inline double min_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  return es.eigenvalues().minCoeff();
}

/// Brute-force minimization of ||AB - lambda B|| / ||B||^2 over a lambda grid
/// with successive zoom refinement.
inline double brute_force_margin(const Eigen::Matrix2d& a, const Eigen::Vector2d& b,
                                 double lambda_lo = -10.0, double lambda_hi = 10.0) {
  const Eigen::Vector2d ab = a * b;
  auto objective = [&](double lambda) { return (ab - lambda * b).norm(); };
  double lo = lambda_lo, hi = lambda_hi;
  double best_lambda = lo;
  for (int level = 0; level < 5; ++level) {
    const int points = 800;
    double best_value = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= points; ++i) {
      const double lambda = lo + (hi - lo) * i / points;
      const double value = objective(lambda);
      if (value < best_value) {
        best_value = value;
        best_lambda = lambda;
      }
    }
    const double width = (hi - lo) / points;
    lo = best_lambda - 2.0 * width;
    hi = best_lambda + 2.0 * width;
  }
  return objective(best_lambda) / b.squaredNorm();
}

/// Trapezoid quadrature of a scalar function sampled on a (possibly
/// nonuniform) grid.
inline double trapezoid(const std::vector<double>& grid, const std::vector<double>& values) {
  double acc = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    acc += 0.5 * (grid[k] - grid[k - 1]) * (values[k] + values[k - 1]);
  }
  return acc;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace oracles
