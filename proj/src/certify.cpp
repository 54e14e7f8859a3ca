#include "landscape/certify.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace landscape {

Eigen::MatrixXd kalman_matrix(const Eigen::MatrixXd& A, const Eigen::VectorXd& B) {
  if (A.rows() != A.cols() || A.rows() != B.size()) {
    throw std::invalid_argument("kalman_matrix: dimension mismatch");
  }
  const Eigen::Index n = A.rows();
  Eigen::MatrixXd k(n, n);
  k.col(0) = B;
  for (Eigen::Index j = 1; j < n; ++j) k.col(j) = A * k.col(j - 1);
  return k;
}

RankResult controllability_rank(const Eigen::MatrixXd& A, const Eigen::VectorXd& B) {
  const Eigen::MatrixXd k = kalman_matrix(A, B);
  const Eigen::VectorXd sigma = k.jacobiSvd().singularValues();
  const double threshold = static_cast<double>(k.rows()) * sigma(0) *
                           std::numeric_limits<double>::epsilon() * 64.0;
  RankResult result;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > threshold && sigma(i) > 0.0) ++result.rank;
  }
  result.controllable = (result.rank == k.rows());
  return result;
}

double local_margin(const Eigen::Matrix2d& A, const Eigen::Vector2d& B) {
  const double b_norm_sq = B.squaredNorm();
  if (b_norm_sq == 0.0) throw std::invalid_argument("local_margin: B must be nonzero");
  const Eigen::Vector2d ab = A * B;
  const double lambda_star = ab.dot(B) / b_norm_sq;
  return (ab - lambda_star * B).norm() / b_norm_sq;
}

double trig_nonlinear_bound(const TrigSystem& sys) {
  return 2.0 * (spectral_norm(sys.C1) + spectral_norm(sys.S1) + spectral_norm(sys.C2) +
                spectral_norm(sys.S2));
}

double trig_df_bound(const TrigSystem& sys) {
  return std::sqrt(2.0) * (spectral_norm(sys.C1) + spectral_norm(sys.S1) +
                           2.0 * spectral_norm(sys.C2) + 2.0 * spectral_norm(sys.S2));
}

bool trajectory_kalman_check(const NonlinearSystem& sys, const DenseOutput& traj) {
  for (const auto& x : traj.values()) {
    const Eigen::MatrixXd a_eff = sys.A + sys.df_at(x);
    if (!controllability_rank(a_eff, sys.B).controllable) return false;
  }
  return true;
}

namespace {

void fill_linear_part(CertificateReport& report, const Eigen::MatrixXd& A,
                      const Eigen::VectorXd& B) {
  const RankResult rank = controllability_rank(A, B);
  report.kalman_rank = rank.rank;
  report.controllable_linear_part = rank.controllable;
  if (A.rows() == 2 && B.norm() > 0.0) {
    report.local_margin = local_margin(Eigen::Matrix2d(A), Eigen::Vector2d(B));
  }
}

void settle_local_certificate(CertificateReport& report) {
  const bool analytic = report.df_bound && report.local_margin &&
                        *report.df_bound < *report.local_margin;
  const bool via_trajectory = report.trajectory_check && *report.trajectory_check;
  report.local_controllability_certified = analytic || via_trajectory;
}

}  // namespace

CertificateReport certify(const TrigSystem& sys, const DenseOutput* traj) {
  CertificateReport report;
  fill_linear_part(report, sys.A, sys.B);
  report.nonlinear_bound = trig_nonlinear_bound(sys);
  report.df_bound = trig_df_bound(sys);
  if (traj) report.trajectory_check = trajectory_kalman_check(sys.as_system(), *traj);
  settle_local_certificate(report);
  return report;
}

CertificateReport certify(const NonlinearSystem& sys, const DenseOutput* traj) {
  sys.validate();
  CertificateReport report;
  fill_linear_part(report, sys.A, sys.B);
  if (!sys.f) {
    // Vanishing nonlinearity: the sup bounds are exact.
    report.nonlinear_bound = 0.0;
    report.df_bound = 0.0;
  }
  if (traj) report.trajectory_check = trajectory_kalman_check(sys, *traj);
  settle_local_certificate(report);
  return report;
}

}  // namespace landscape
