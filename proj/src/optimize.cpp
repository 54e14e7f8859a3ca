#include "landscape/optimize.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "landscape/rng.hpp"

namespace landscape {

namespace {

constexpr double kAtGoalDistance = 1e-12;

Eigen::MatrixXd unflatten(const Eigen::VectorXd& v, int n) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), n, n);
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

// Integrates a matrix ODE dM/dt = coeff(t, M) along the trajectory span and
// samples the solution at the requested grid times. The grid times are fed to
// the integrator as mandatory checkpoints, so the sampled matrices are
// accepted-step values rather than interpolants.
template <typename CoeffFn>
TransitionMatrixPath integrate_matrix_path(const NonlinearSystem& sys, const DenseOutput& traj,
                                           const std::vector<double>& grid,
                                           const IntegratorConfig& config, CoeffFn&& product) {
  const int n = sys.dim();
  if (grid.empty()) throw std::invalid_argument("transition_matrix: empty grid");
  std::vector<double> checkpoints{traj.start_time()};
  for (double t : grid) {
    if (t < traj.start_time() || t > traj.end_time()) {
      throw std::invalid_argument("transition_matrix: grid time outside trajectory span");
    }
    if (t > checkpoints.back()) checkpoints.push_back(t);
  }
  if (checkpoints.size() < 2) checkpoints.push_back(traj.end_time());

  VectorField rhs = [&](double t, const Eigen::VectorXd& v, Eigen::VectorXd& dvdt) {
    const double tc = std::clamp(t, traj.start_time(), traj.end_time());
    const Eigen::MatrixXd coeff = sys.A + sys.df_at(traj.at(tc));
    dvdt = flatten(product(coeff, unflatten(v, n)));
  };
  const DenseOutput dense =
      integrate(rhs, flatten(Eigen::MatrixXd::Identity(n, n)), checkpoints, config);

  TransitionMatrixPath path;
  path.grid = grid;
  path.M.reserve(grid.size());
  for (double t : grid) path.M.push_back(unflatten(dense.at(t), n));
  if (grid.front() == traj.start_time()) {
    path.M.front() = Eigen::MatrixXd::Identity(n, n);
  }
  for (const auto& m : path.M) {
    if (!(m.determinant() > 0.0)) {
      throw NumericalFailure("transition matrix determinant not positive");
    }
  }
  return path;
}

// Solves M y = b. Planar systems use the adjugate closed form; larger ones a
// partial-pivot LU. det M > 0 was already established for path matrices.
Eigen::VectorXd solve_matrix(const Eigen::MatrixXd& m, const Eigen::VectorXd& b) {
  if (m.rows() == 2) {
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    if (det <= std::numeric_limits<double>::min()) {
      throw NumericalFailure("singular transition matrix");
    }
    return Eigen::Vector2d((m(1, 1) * b[0] - m(0, 1) * b[1]) / det,
                           (-m(1, 0) * b[0] + m(0, 0) * b[1]) / det);
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  return lu.solve(b);
}

}  // namespace

TransitionMatrixPath transition_matrix(const NonlinearSystem& sys, const DenseOutput& traj,
                                       const std::vector<double>& grid,
                                       const IntegratorConfig& config) {
  return integrate_matrix_path(sys, traj, grid, config,
                               [](const Eigen::MatrixXd& coeff, const Eigen::MatrixXd& m) {
                                 return Eigen::MatrixXd(coeff * m);
                               });
}

TransitionMatrixPath inverse_transition_matrix(const NonlinearSystem& sys,
                                               const DenseOutput& traj,
                                               const std::vector<double>& grid,
                                               const IntegratorConfig& config) {
  return integrate_matrix_path(sys, traj, grid, config,
                               [](const Eigen::MatrixXd& coeff, const Eigen::MatrixXd& m) {
                                 return Eigen::MatrixXd(-m * coeff);
                               });
}

std::optional<Eigen::VectorXd> control_gradient(const NonlinearSystem& sys,
                                                const Eigen::VectorXd& x_final,
                                                const TransitionMatrixPath& m_path,
                                                const Goal& goal) {
  const Eigen::VectorXd residual = goal.point - x_final;
  const double distance = residual.norm();
  if (distance < kAtGoalDistance) return std::nullopt;
  const Eigen::VectorXd v = residual / distance;
  const Eigen::VectorXd u = m_path.at_final().transpose() * v;  // g(t) = u' M(t)^-1 B

  Eigen::VectorXd g(m_path.grid.size());
  for (std::size_t k = 0; k < m_path.M.size(); ++k) {
    g[static_cast<Eigen::Index>(k)] = u.dot(solve_matrix(m_path.M[k], sys.B));
  }
  return g;
}

void FlowConfig::validate() const {
  if (!(beta > 0.0)) throw std::invalid_argument("FlowConfig: beta must be > 0");
  if (!(s_max > 0.0)) throw std::invalid_argument("FlowConfig: s_max must be > 0");
  if (!(convergence_threshold > 0.0)) {
    throw std::invalid_argument("FlowConfig: convergence_threshold must be > 0");
  }
  if (stall_window < 1) throw std::invalid_argument("FlowConfig: stall_window must be >= 1");
  if (!(stall_tolerance > 0.0)) {
    throw std::invalid_argument("FlowConfig: stall_tolerance must be > 0");
  }
  integrator.validate();
  inner_integrator.validate();
}

const char* to_string(RunOutcome outcome) {
  switch (outcome) {
    case RunOutcome::Converged: return "converged";
    case RunOutcome::TimedOut: return "timed_out";
    case RunOutcome::PrecisionStall: return "precision_stall";
    case RunOutcome::TrapSuspected: return "trap_suspected";
  }
  return "unknown";
}

RunRecord dmorph_flow(const NonlinearSystem& sys, const Eigen::VectorXd& x0,
                      const ControlSignal& w0, const Goal& goal, const FlowConfig& config) {
  config.validate();
  const double t_final = w0.t_final();
  const int n_samples = w0.size();
  const std::vector<double> grid = w0.grid_times();

  auto to_control = [&](const Eigen::VectorXd& v) {
    return ControlSignal(t_final, std::vector<double>(v.data(), v.data() + v.size()));
  };
  auto distance_of = [&](const ControlSignal& w) {
    return (endpoint_map(sys, x0, w, config.inner_integrator).x_final - goal.point).norm();
  };

  // s-flow right-hand side: beta times the fidelity gradient of the current
  // control, zero exactly at the goal. Inner integration failures abort the
  // run and must not be mistaken for s-step budget exhaustion.
  VectorField rhs = [&](double, const Eigen::VectorXd& w_vec, Eigen::VectorXd& dwds) {
    const ControlSignal w = to_control(w_vec);
    EndpointResult ep;
    TransitionMatrixPath m_path;
    try {
      ep = endpoint_map(sys, x0, w, config.inner_integrator);
      m_path = transition_matrix(sys, ep.trajectory, grid, config.inner_integrator);
    } catch (const IntegrationFailure& e) {
      throw NumericalFailure(std::string("inner integration failed: ") + e.what());
    }
    const auto g = control_gradient(sys, ep.x_final, m_path, goal);
    if (g) {
      dwds = config.beta * (*g);
    } else {
      dwds.setZero(n_samples);
    }
  };

  RunRecord record;
  record.control_final = w0;
  const double dist0 = distance_of(w0);
  double phi = -dist0;
  record.fidelity_curve.emplace_back(0.0, phi);
  record.final_distance = dist0;
  if (dist0 < config.convergence_threshold) {
    record.outcome = RunOutcome::Converged;
    return record;
  }

  Eigen::VectorXd w_vec =
      Eigen::Map<const Eigen::VectorXd>(w0.samples().data(), n_samples);
  Stepper stepper(rhs, 0.0, w_vec, config.integrator);

  double best_phi = phi;
  int steps_since_improvement = 0;
  auto monotone_allowance = [&config](double phi_prev) {
    return 10.0 * (config.integrator.rel_tol * std::max(1.0, std::abs(phi_prev)) +
                   config.integrator.abs_tol);
  };

  record.outcome = RunOutcome::TimedOut;
  while (true) {
    bool stepped = false;
    try {
      stepped = stepper.advance(config.s_max);
    } catch (const IntegrationFailure&) {
      // s-step budget exhausted or step underflow near a kink: classify by
      // whether fidelity was still moving.
      record.outcome = (steps_since_improvement >= config.stall_window)
                           ? RunOutcome::PrecisionStall
                           : RunOutcome::TimedOut;
      break;
    }
    if (!stepped) {
      record.outcome = RunOutcome::TimedOut;  // reached s_max
      break;
    }
    ++record.wall_iterations;

    const ControlSignal w = to_control(stepper.state());
    const double dist = distance_of(w);
    const double new_phi = -dist;
    record.fidelity_curve.emplace_back(stepper.time(), new_phi);
    record.control_final = w;
    record.final_distance = dist;

    if (dist < config.convergence_threshold) {
      record.outcome = RunOutcome::Converged;
      break;
    }
    if (new_phi < phi - monotone_allowance(phi)) {
      record.outcome = RunOutcome::PrecisionStall;
      break;
    }
    if (new_phi > best_phi + config.stall_tolerance) {
      best_phi = new_phi;
      steps_since_improvement = 0;
    } else if (++steps_since_improvement >= config.stall_window) {
      record.outcome = RunOutcome::PrecisionStall;
      break;
    }
    phi = new_phi;
  }
  return record;
}

HillClimbResult hill_climb(const NonlinearSystem& sys, const Eigen::VectorXd& x0,
                           const ControlSignal& w, const Goal& goal, double sigma,
                           int max_tries, std::uint64_t rng_seed,
                           const IntegratorConfig& inner) {
  if (!(sigma > 0.0)) throw std::invalid_argument("hill_climb: sigma must be > 0");
  if (max_tries < 1) throw std::invalid_argument("hill_climb: max_tries must be >= 1");

  Rng rng(rng_seed);
  const double phi0 = fidelity(endpoint_map(sys, x0, w, inner).x_final, goal);
  const int halving_period = std::max(1, max_tries / 4);

  std::vector<double> proposal(w.samples().size());
  double current_sigma = sigma;
  int consecutive_failures = 0;
  for (int attempt = 1; attempt <= max_tries; ++attempt) {
    for (std::size_t i = 0; i < proposal.size(); ++i) {
      proposal[i] = w.samples()[i] + current_sigma * rng.normal();
    }
    const ControlSignal candidate = w.with_samples(proposal);
    const double phi = fidelity(endpoint_map(sys, x0, candidate, inner).x_final, goal);
    if (phi > phi0) {
      return HillClimbResult{candidate, phi - phi0, attempt};
    }
    if (++consecutive_failures % halving_period == 0) current_sigma *= 0.5;
  }
  return HillClimbResult{w, 0.0, max_tries};
}

}  // namespace landscape
