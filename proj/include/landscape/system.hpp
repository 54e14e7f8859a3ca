#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "landscape/odeint.hpp"

namespace landscape {

/// A scalar control w(t) sampled on the uniform grid k*T/(N-1), k = 0..N-1,
/// evaluated by linear interpolation. Immutable after construction.
class ControlSignal {
 public:
  ControlSignal(double t_final, std::vector<double> samples);

  static ControlSignal constant(double value, double t_final, int n_samples);

  /// Linear interpolation of the samples; throws std::domain_error for
  /// t outside [0, T].
  double value(double t) const;

  double t_final() const { return t_final_; }
  const std::vector<double>& samples() const { return samples_; }
  int size() const { return static_cast<int>(samples_.size()); }
  double dt() const { return t_final_ / (size() - 1); }
  double grid_time(int k) const { return k * dt(); }
  std::vector<double> grid_times() const;
  double rms() const;

  ControlSignal with_samples(std::vector<double> samples) const {
    return ControlSignal(t_final_, std::move(samples));
  }

 private:
  double t_final_;
  std::vector<double> samples_;
};

/// dx/dt = A x + B w(t) + f(x) with a single control channel. f and df may
/// be empty, in which case the nonlinear part is zero.
struct NonlinearSystem {
  Eigen::MatrixXd A;
  Eigen::VectorXd B;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> df;

  int dim() const { return static_cast<int>(A.rows()); }

  Eigen::VectorXd f_at(const Eigen::VectorXd& x) const {
    return f ? f(x) : Eigen::VectorXd::Zero(x.size());
  }
  Eigen::MatrixXd df_at(const Eigen::VectorXd& x) const {
    return df ? df(x) : Eigen::MatrixXd::Zero(x.size(), x.size());
  }

  static NonlinearSystem linear(Eigen::MatrixXd A, Eigen::VectorXd B);
  void validate() const;
};

/// Planar system whose nonlinearity is a fixed combination of single- and
/// double-angle sines and cosines applied componentwise:
///   f(x) = C1 [cos x0, cos x1]' + S1 [sin x0, sin x1]'
///        + C2 [cos 2x0, cos 2x1]' + S2 [sin 2x0, sin 2x1]'
struct TrigSystem {
  Eigen::Matrix2d A;
  Eigen::Vector2d B;
  Eigen::Matrix2d C1 = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d S1 = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d C2 = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d S2 = Eigen::Matrix2d::Zero();

  Eigen::Vector2d f(const Eigen::Vector2d& x) const;
  Eigen::Matrix2d df(const Eigen::Vector2d& x) const;
  NonlinearSystem as_system() const;
};

struct Goal {
  Eigen::VectorXd point;
};

struct EndpointResult {
  Eigen::VectorXd x_final;
  DenseOutput trajectory;
};

/// Solves dx/dt = A x + B w(t) + f(x) over [0, T] and returns x(T) together
/// with the dense trajectory.
EndpointResult endpoint_map(const NonlinearSystem& sys, const Eigen::VectorXd& x0,
                            const ControlSignal& w, const IntegratorConfig& config = {});

/// Phi = -||x_final - G||; maximal value 0 exactly at the goal.
double fidelity(const Eigen::VectorXd& x_final, const Goal& goal);

/// Largest singular value. The 2x2 case uses the closed-form eigenvalues of
/// the Gram matrix; larger matrices fall back to an SVD.
double spectral_norm(const Eigen::MatrixXd& m);

/// Max relative discrepancy between df and central finite differences of f
/// over the given sample points.
double jacobian_consistency_error(const NonlinearSystem& sys,
                                  const std::vector<Eigen::VectorXd>& points);

}  // namespace landscape
