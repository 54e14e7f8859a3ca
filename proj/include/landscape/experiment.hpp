#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "landscape/certify.hpp"
#include "landscape/optimize.hpp"
#include "landscape/rng.hpp"
#include "landscape/system.hpp"

namespace landscape {

class GenerationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NoiseKind { Uniform, Gaussian };

struct ProtocolConfig {
  int n_systems = 100;
  int n_goals = 10;
  int n_controls = 10;
  double ab_range = 1.0;     // A, B entries uniform in (-ab_range, ab_range)
  double trig_range = 0.1;   // C1, S1, C2, S2 entries uniform in (-trig_range, trig_range)
  double goal_range = 2.0;   // goal coordinates uniform in (-goal_range, goal_range)
  std::uint64_t master_seed = 0;
  int control_grid_size = 128;
  double t_final = 1.0;
  Eigen::Vector2d x0 = Eigen::Vector2d::Zero();
  NoiseKind noise = NoiseKind::Uniform;
  int max_rescue_cycles = 5;
  int hill_climb_tries = 200;
  FlowConfig flow;

  void validate() const;
};

struct GeneratedSystem {
  TrigSystem system;
  int rejections = 0;
};

/// Draws trig-family systems at the given ranges, rejecting until the linear
/// part has full Kalman rank and the analytic Jacobian bound sits below the
/// planar margin. Throws GenerationFailure after 10^6 rejections.
GeneratedSystem generate_system(Rng& rng, double ab_range = 1.0, double trig_range = 0.1);

/// Prefix sums of noise draws (smoothed white noise).
ControlSignal control_from_noise(const std::vector<double>& draws, double t_final);

/// N i.i.d. draws (uniform(-1,1) or standard normal) accumulated into a
/// random-walk control.
ControlSignal generate_initial_control(Rng& rng, int n_samples, double t_final,
                                       NoiseKind noise = NoiseKind::Uniform);

struct BatchRecord {
  int system_index = 0;
  int goal_index = 0;
  int control_index = 0;
  RunRecord record;
  std::optional<std::string> error;  // set when the run aborted
};

struct BatchSummary {
  std::int64_t total_runs = 0;
  double pct_converged = 0.0;
  double pct_timed_out = 0.0;
  double pct_precision_stall = 0.0;
  int n_trap_suspected = 0;
  int stall_rescues = 0;    // precision stalls improved by hill climbing
  int timeout_rescues = 0;  // timeouts improved by hill climbing
  int n_aborted = 0;
  double generator_acceptance_rate = 1.0;
};

struct BatchResult {
  std::vector<BatchRecord> records;  // sorted by (system, goal, control)
  BatchSummary summary;
};

/// One optimization run with the rescue protocol: every stalled or timed-out
/// flow is followed by a hill climb; an improvement restarts the flow (up to
/// max_rescue_cycles), a failure to improve marks the run TrapSuspected.
RunRecord run_with_rescue(const NonlinearSystem& sys, const Eigen::VectorXd& x0,
                          const ControlSignal& w0, const Goal& goal,
                          const FlowConfig& flow, int max_rescue_cycles,
                          int hill_climb_tries, std::uint64_t run_seed);

/// Executes the n_systems x n_goals x n_controls study. Systems, goals, and
/// initial controls are derived from master_seed alone, and results are
/// collected by index, so the output is identical for any jobs count.
BatchResult run_batch(const ProtocolConfig& config, int jobs = 1);

struct LandscapeGrid {
  std::vector<double> a_values;
  std::vector<double> b_values;
  Eigen::MatrixXd phi;  // phi(i, j) = Phi(a_i * basis1 + b_j * basis2); NaN = failed cell
};

/// Evaluates the fidelity over the two-dimensional control slice
/// a * basis1 + b * basis2. Basis signals must share grid and be linearly
/// independent. Integrator failures leave NaN cells.
LandscapeGrid landscape_grid(const NonlinearSystem& sys, const Eigen::VectorXd& x0,
                             const Goal& goal, const ControlSignal& basis1,
                             const ControlSignal& basis2, double a_min, double a_max,
                             double b_min, double b_max, int resolution,
                             const IntegratorConfig& config = {});

}  // namespace landscape
