#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace landscape {

/// Right-hand side of an ODE: writes dx/dt for the given (t, x) into dxdt.
/// dxdt is pre-sized to the state dimension.
using VectorField =
    std::function<void(double t, const Eigen::VectorXd& x, Eigen::VectorXd& dxdt)>;

enum class IntegratorMethod { AdaptiveRk45, FixedRk4 };

struct IntegratorConfig {
  IntegratorMethod method = IntegratorMethod::AdaptiveRk45;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double initial_step = 0.0;  // 0 = automatic; step size for FixedRk4
  std::int64_t max_steps = 1'000'000;

  void validate() const;
};

/// Thrown when a step shrinks below machine resolution or the step budget
/// runs out. Carries the last time that was reached successfully.
class IntegrationFailure : public std::runtime_error {
 public:
  IntegrationFailure(const std::string& what, double last_good_time)
      : std::runtime_error(what), last_good_time_(last_good_time) {}
  double last_good_time() const { return last_good_time_; }

 private:
  double last_good_time_;
};

/// Piecewise-linear interpolant through the accepted integration steps.
/// Nodes are stored in integration order (ascending for forward runs,
/// descending for backward runs); the first node is the integration start
/// and the last node is the integration end.
class DenseOutput {
 public:
  DenseOutput() = default;
  DenseOutput(std::vector<double> grid, std::vector<Eigen::VectorXd> values);

  /// Linear interpolation; throws std::domain_error outside the time span.
  Eigen::VectorXd at(double t) const;

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<Eigen::VectorXd>& values() const { return values_; }
  double start_time() const { return grid_.front(); }
  double end_time() const { return grid_.back(); }
  const Eigen::VectorXd& final_state() const { return values_.back(); }
  std::size_t size() const { return grid_.size(); }

 private:
  std::vector<double> grid_;
  std::vector<Eigen::VectorXd> values_;
};

/// Single-sequence stepping driver. Used directly by callers that need to
/// inspect the state after every accepted step (e.g. flow loops with their
/// own termination logic); integrate() wraps it.
class Stepper {
 public:
  Stepper(VectorField rhs, double t0, Eigen::VectorXd x0, IntegratorConfig config);

  /// Advances by one accepted step toward t_end (never past it). Returns
  /// false without stepping when t_end has already been reached. Throws
  /// IntegrationFailure on step underflow or when max_steps is exhausted.
  bool advance(double t_end);

  double time() const { return t_; }
  const Eigen::VectorXd& state() const { return x_; }
  std::int64_t accepted_steps() const { return accepted_; }

 private:
  void rk45_step(double t_end);
  void rk4_step(double t_end);

  VectorField rhs_;
  IntegratorConfig config_;
  double t_;
  Eigen::VectorXd x_;
  double h_ = 0.0;       // current trial step (adaptive) or fixed step
  bool have_k1_ = false; // FSAL cache validity
  Eigen::VectorXd k_[7];
  Eigen::VectorXd x_trial_, err_vec_;
  std::int64_t accepted_ = 0;
  std::int64_t attempts_ = 0;
};

/// Integrates dx/dt = rhs(t, x) from t0 to t1 and returns the accepted-step
/// trajectory. Integration direction follows sign(t1 - t0).
DenseOutput integrate(const VectorField& rhs, const Eigen::VectorXd& x0, double t0,
                      double t1, const IntegratorConfig& config = {});

/// Same, but lands exactly on every checkpoint (strictly monotone, at least
/// two entries; the first and last delimit the span). Used whenever the
/// right-hand side has breakpoints -- e.g. the slope kinks of an interpolated
/// control -- so no step straddles a non-smooth point.
DenseOutput integrate(const VectorField& rhs, const Eigen::VectorXd& x0,
                      const std::vector<double>& checkpoints,
                      const IntegratorConfig& config = {});

}  // namespace landscape
