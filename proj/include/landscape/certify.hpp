#pragma once

#include <Eigen/Core>
#include <optional>

#include "landscape/system.hpp"

namespace landscape {

/// Outcome of the three-assumption checks. Margin fields are absent when the
/// corresponding closed form does not apply (non-planar systems, or
/// nonlinearities without an analytic bound). All norms are spectral.
struct CertificateReport {
  int kalman_rank = 0;
  bool controllable_linear_part = false;
  std::optional<double> nonlinear_bound;  // sup ||f||
  std::optional<double> df_bound;         // sup ||Df||
  std::optional<double> local_margin;     // certified threshold for ||Df||
  bool local_controllability_certified = false;
  std::optional<bool> trajectory_check;

  bool all_passed() const {
    return controllable_linear_part && local_controllability_certified;
  }
};

/// Columns B, AB, ..., A^(n-1)B.
Eigen::MatrixXd kalman_matrix(const Eigen::MatrixXd& A, const Eigen::VectorXd& B);

struct RankResult {
  int rank = 0;
  bool controllable = false;
};

/// Numerical rank of the Kalman matrix, counting singular values above
/// n * sigma_max * eps * 64.
RankResult controllability_rank(const Eigen::MatrixXd& A, const Eigen::VectorXd& B);

/// Planar local-controllability threshold min_lambda ||AB - lambda B|| / ||B||^2.
/// ||Df|| below this value certifies local surjectivity. Throws
/// std::invalid_argument when B = 0.
double local_margin(const Eigen::Matrix2d& A, const Eigen::Vector2d& B);

/// Analytic sup bound 2(||C1|| + ||S1|| + ||C2|| + ||S2||) on ||f||.
double trig_nonlinear_bound(const TrigSystem& sys);

/// Analytic sup bound sqrt(2)(||C1|| + ||S1|| + 2||C2|| + 2||S2||) on ||Df||.
double trig_df_bound(const TrigSystem& sys);

/// True iff [B, (A+Df(x(t)))B, ...] is numerically full rank at every
/// trajectory grid time.
bool trajectory_kalman_check(const NonlinearSystem& sys, const DenseOutput& traj);

/// Assembles all certificates for a trig-family system using the analytic
/// bound route; a trajectory, when supplied, adds the time-varying rank check.
CertificateReport certify(const TrigSystem& sys, const DenseOutput* traj = nullptr);

/// General-system variant: analytic bounds are unavailable, so local
/// controllability can only be certified through the trajectory route.
CertificateReport certify(const NonlinearSystem& sys, const DenseOutput* traj = nullptr);

}  // namespace landscape
