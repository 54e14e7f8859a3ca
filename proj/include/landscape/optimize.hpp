#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "landscape/system.hpp"

namespace landscape {

class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Transition matrix M(t) solving dM/dt = (A + Df(x(t))) M, M(0) = I,
/// sampled at the requested grid times. det M(t) > 0 along any flow of a
/// smooth field; a non-positive determinant is reported as NumericalFailure.
struct TransitionMatrixPath {
  std::vector<double> grid;
  std::vector<Eigen::MatrixXd> M;

  const Eigen::MatrixXd& at_final() const { return M.back(); }
};

/// Integrates the matrix variational equation along the given state
/// trajectory and samples it at grid (typically the control grid).
TransitionMatrixPath transition_matrix(const NonlinearSystem& sys, const DenseOutput& traj,
                                       const std::vector<double>& grid,
                                       const IntegratorConfig& config = {});

/// Cross-check path: integrates d(M^-1)/dt = -M^-1 (A + Df) forward from I,
/// yielding M(t)^-1 without ever inverting M.
TransitionMatrixPath inverse_transition_matrix(const NonlinearSystem& sys,
                                               const DenseOutput& traj,
                                               const std::vector<double>& grid,
                                               const IntegratorConfig& config = {});

/// Gradient of Phi = -||x(T) - G|| with respect to the control, evaluated at
/// every grid time of m_path:
///   g(t) = ((G - x(T)) / ||G - x(T)||)' M(T) M(t)^-1 B.
/// Returns nullopt when x(T) is within 1e-12 of the goal (the gradient of the
/// norm is undefined there; callers treat this as converged). Throws
/// NumericalFailure when any M(t) is singular or has non-positive determinant.
std::optional<Eigen::VectorXd> control_gradient(const NonlinearSystem& sys,
                                                const Eigen::VectorXd& x_final,
                                                const TransitionMatrixPath& m_path,
                                                const Goal& goal);

struct FlowConfig {
  double beta = 1.0;            // learning rate of the homotopy flow
  double s_max = 500.0;         // homotopy horizon
  double convergence_threshold = 1e-3;
  int stall_window = 25;        // accepted steps without improvement => stall
  double stall_tolerance = 1e-12;
  IntegratorConfig integrator{IntegratorMethod::AdaptiveRk45, 1e-6, 1e-8, 0.0, 20'000};
  IntegratorConfig inner_integrator{};

  void validate() const;
};

enum class RunOutcome { Converged, TimedOut, PrecisionStall, TrapSuspected };

const char* to_string(RunOutcome outcome);

/// A hill-climb rescue applied after a stalled or timed-out flow phase.
struct RescueEvent {
  RunOutcome trigger = RunOutcome::PrecisionStall;
  double delta_fidelity = 0.0;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<std::pair<double, double>> fidelity_curve;  // (s, Phi)
  RunOutcome outcome = RunOutcome::TimedOut;
  double final_distance = 0.0;
  ControlSignal control_final = ControlSignal::constant(0.0, 1.0, 2);
  std::int64_t wall_iterations = 0;
  std::vector<RescueEvent> rescues;
};

/// Evolves the control samples along the gradient ascent of Phi in the
/// homotopy parameter s, recomputing trajectory, transition matrix, and
/// gradient at every stage evaluation. Terminates as Converged (distance
/// below threshold), PrecisionStall (no fidelity improvement beyond
/// stall_tolerance over stall_window accepted steps, or a monotonicity
/// violation beyond 10x the s-integrator tolerance), or TimedOut (s_max or
/// the step budget reached while still improving).
RunRecord dmorph_flow(const NonlinearSystem& sys, const Eigen::VectorXd& x0,
                      const ControlSignal& w0, const Goal& goal, const FlowConfig& config);

struct HillClimbResult {
  ControlSignal control;
  double delta_fidelity = 0.0;
  int tries = 0;
};

/// Proposes w + dw with i.i.d. Gaussian per-sample noise of scale sigma and
/// returns the first proposal that strictly improves Phi, or the original
/// control with delta_fidelity = 0 after max_tries failures. sigma halves
/// after every max_tries/4 consecutive failures.
HillClimbResult hill_climb(const NonlinearSystem& sys, const Eigen::VectorXd& x0,
                           const ControlSignal& w, const Goal& goal, double sigma,
                           int max_tries, std::uint64_t rng_seed,
                           const IntegratorConfig& inner = {});

}  // namespace landscape
