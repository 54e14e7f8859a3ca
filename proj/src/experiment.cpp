#include "landscape/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace landscape {

namespace {

constexpr int kMaxRejections = 1'000'000;

// Seed-derivation tags, one per stream family.
enum : std::uint64_t { kSystemTag = 0x53595354, kGoalTag = 0x474f414c, kControlTag = 0x4354524c,
                       kRunTag = 0x52554e53 };

}  // namespace

void ProtocolConfig::validate() const {
  if (n_systems < 1 || n_goals < 1 || n_controls < 1) {
    throw std::invalid_argument("ProtocolConfig: counts must be >= 1");
  }
  if (!(ab_range > 0.0) || !(trig_range > 0.0) || !(goal_range > 0.0)) {
    throw std::invalid_argument("ProtocolConfig: ranges must be > 0");
  }
  if (control_grid_size < 2) {
    throw std::invalid_argument("ProtocolConfig: control_grid_size must be >= 2");
  }
  if (!(t_final > 0.0)) throw std::invalid_argument("ProtocolConfig: t_final must be > 0");
  if (max_rescue_cycles < 0) {
    throw std::invalid_argument("ProtocolConfig: max_rescue_cycles must be >= 0");
  }
  if (hill_climb_tries < 1) {
    throw std::invalid_argument("ProtocolConfig: hill_climb_tries must be >= 1");
  }
  flow.validate();
}

GeneratedSystem generate_system(Rng& rng, double ab_range, double trig_range) {
  auto draw_matrix = [&rng](double range) {
    Eigen::Matrix2d m;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) m(i, j) = rng.uniform(-range, range);
    return m;
  };

  GeneratedSystem out;
  for (;;) {
    TrigSystem sys;
    sys.A = draw_matrix(ab_range);
    sys.B = Eigen::Vector2d(rng.uniform(-ab_range, ab_range), rng.uniform(-ab_range, ab_range));
    sys.C1 = draw_matrix(trig_range);
    sys.S1 = draw_matrix(trig_range);
    sys.C2 = draw_matrix(trig_range);
    sys.S2 = draw_matrix(trig_range);

    if (sys.B.norm() > 0.0 && controllability_rank(sys.A, sys.B).controllable &&
        trig_df_bound(sys) < local_margin(sys.A, sys.B)) {
      out.system = sys;
      return out;
    }
    if (++out.rejections > kMaxRejections) {
      throw GenerationFailure("generate_system: rejection limit exceeded; check ranges");
    }
  }
}

ControlSignal control_from_noise(const std::vector<double>& draws, double t_final) {
  std::vector<double> samples(draws.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    acc += draws[i];
    samples[i] = acc;
  }
  return ControlSignal(t_final, std::move(samples));
}

ControlSignal generate_initial_control(Rng& rng, int n_samples, double t_final,
                                       NoiseKind noise) {
  std::vector<double> draws(static_cast<std::size_t>(n_samples));
  for (auto& d : draws) {
    d = (noise == NoiseKind::Uniform) ? rng.uniform(-1.0, 1.0) : rng.normal();
  }
  return control_from_noise(draws, t_final);
}

RunRecord run_with_rescue(const NonlinearSystem& sys, const Eigen::VectorXd& x0,
                          const ControlSignal& w0, const Goal& goal,
                          const FlowConfig& flow, int max_rescue_cycles,
                          int hill_climb_tries, std::uint64_t run_seed) {
  RunRecord record = dmorph_flow(sys, x0, w0, goal, flow);
  record.seed = run_seed;

  int cycle = 0;
  while ((record.outcome == RunOutcome::TimedOut ||
          record.outcome == RunOutcome::PrecisionStall) &&
         cycle < max_rescue_cycles) {
    ++cycle;
    const double sigma = 1e-3 * (record.control_final.rms() + 1.0);
    const HillClimbResult hc =
        hill_climb(sys, x0, record.control_final, goal, sigma, hill_climb_tries,
                   derive_seed(run_seed, kRunTag, static_cast<std::uint64_t>(cycle)),
                   flow.inner_integrator);
    if (!(hc.delta_fidelity > 0.0)) {
      record.outcome = RunOutcome::TrapSuspected;
      break;
    }
    record.rescues.push_back(RescueEvent{record.outcome, hc.delta_fidelity});

    // Splice the hill-climb gain into the curve at the current s, then
    // restart the flow from the improved control.
    const double s_offset = record.fidelity_curve.back().first;
    const double phi_after = record.fidelity_curve.back().second + hc.delta_fidelity;
    record.fidelity_curve.emplace_back(s_offset, phi_after);

    RunRecord next = dmorph_flow(sys, x0, hc.control, goal, flow);
    for (const auto& [s, phi] : next.fidelity_curve) {
      record.fidelity_curve.emplace_back(s_offset + s, phi);
    }
    record.outcome = next.outcome;
    record.final_distance = next.final_distance;
    record.control_final = next.control_final;
    record.wall_iterations += next.wall_iterations;
  }
  return record;
}

BatchResult run_batch(const ProtocolConfig& config, int jobs) {
  config.validate();
  const int total = config.n_systems * config.n_goals * config.n_controls;

  // All inputs are derived up front from the master seed alone, so worker
  // scheduling cannot influence the outputs.
  std::vector<NonlinearSystem> systems(config.n_systems);
  std::int64_t total_rejections = 0;
  for (int i = 0; i < config.n_systems; ++i) {
    Rng rng(derive_seed(config.master_seed, kSystemTag, static_cast<std::uint64_t>(i)));
    GeneratedSystem gen = generate_system(rng, config.ab_range, config.trig_range);
    systems[i] = gen.system.as_system();
    total_rejections += gen.rejections;
  }
  std::vector<Goal> goals(static_cast<std::size_t>(config.n_systems) * config.n_goals);
  for (int i = 0; i < config.n_systems; ++i) {
    for (int j = 0; j < config.n_goals; ++j) {
      Rng rng(derive_seed(config.master_seed, kGoalTag, static_cast<std::uint64_t>(i),
                          static_cast<std::uint64_t>(j)));
      goals[i * config.n_goals + j] =
          Goal{Eigen::Vector2d(rng.uniform(-config.goal_range, config.goal_range),
                               rng.uniform(-config.goal_range, config.goal_range))};
    }
  }

  BatchResult result;
  result.records.resize(total);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int idx = next.fetch_add(1);
      if (idx >= total) return;
      const int i = idx / (config.n_goals * config.n_controls);
      const int j = (idx / config.n_controls) % config.n_goals;
      const int k = idx % config.n_controls;

      BatchRecord& slot = result.records[idx];
      slot.system_index = i;
      slot.goal_index = j;
      slot.control_index = k;
      const std::uint64_t run_seed =
          derive_seed(config.master_seed, kRunTag,
                      static_cast<std::uint64_t>(i) * 1'000'000 + static_cast<std::uint64_t>(j),
                      static_cast<std::uint64_t>(k));
      try {
        Rng rng(derive_seed(config.master_seed, kControlTag,
                            static_cast<std::uint64_t>(i) * 1'000'000 +
                                static_cast<std::uint64_t>(j),
                            static_cast<std::uint64_t>(k)));
        const ControlSignal w0 = generate_initial_control(rng, config.control_grid_size,
                                                          config.t_final, config.noise);
        slot.record = run_with_rescue(systems[i], config.x0, w0,
                                      goals[i * config.n_goals + j], config.flow,
                                      config.max_rescue_cycles, config.hill_climb_tries,
                                      run_seed);
      } catch (const std::exception& e) {
        slot.error = e.what();
        slot.record.seed = run_seed;
      }
    }
  };

  const int n_threads = std::max(1, jobs);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  BatchSummary& summary = result.summary;
  summary.total_runs = total;
  std::int64_t converged = 0, timed_out = 0, stalled = 0;
  for (const auto& rec : result.records) {
    if (rec.error) {
      ++summary.n_aborted;
      continue;
    }
    switch (rec.record.outcome) {
      case RunOutcome::Converged: ++converged; break;
      case RunOutcome::TimedOut: ++timed_out; break;
      case RunOutcome::PrecisionStall: ++stalled; break;
      case RunOutcome::TrapSuspected: ++summary.n_trap_suspected; break;
    }
    // Rescues are attributed to the flow phase that triggered them; the
    // final outcome may differ after restarts.
    for (const auto& rescue : rec.record.rescues) {
      if (rescue.trigger == RunOutcome::PrecisionStall) {
        ++summary.stall_rescues;
      } else {
        ++summary.timeout_rescues;
      }
    }
  }
  const double denom = static_cast<double>(total);
  summary.pct_converged = 100.0 * static_cast<double>(converged) / denom;
  summary.pct_timed_out = 100.0 * static_cast<double>(timed_out) / denom;
  summary.pct_precision_stall = 100.0 * static_cast<double>(stalled) / denom;
  summary.generator_acceptance_rate =
      static_cast<double>(config.n_systems) /
      static_cast<double>(config.n_systems + total_rejections);
  return result;
}

LandscapeGrid landscape_grid(const NonlinearSystem& sys, const Eigen::VectorXd& x0,
                             const Goal& goal, const ControlSignal& basis1,
                             const ControlSignal& basis2, double a_min, double a_max,
                             double b_min, double b_max, int resolution,
                             const IntegratorConfig& config) {
  if (resolution < 1) throw std::invalid_argument("landscape_grid: resolution must be >= 1");
  if (basis1.size() != basis2.size() || basis1.t_final() != basis2.t_final()) {
    throw std::invalid_argument("landscape_grid: basis grids must match");
  }
  // Linear independence of the sample vectors via the Gram determinant.
  const Eigen::Map<const Eigen::VectorXd> v1(basis1.samples().data(), basis1.size());
  const Eigen::Map<const Eigen::VectorXd> v2(basis2.samples().data(), basis2.size());
  const double gram = v1.squaredNorm() * v2.squaredNorm() - v1.dot(v2) * v1.dot(v2);
  if (!(gram > 1e-12 * v1.squaredNorm() * v2.squaredNorm())) {
    throw std::invalid_argument("landscape_grid: basis signals are linearly dependent");
  }

  LandscapeGrid grid;
  auto axis = [resolution](double lo, double hi) {
    std::vector<double> v(static_cast<std::size_t>(resolution));
    for (int i = 0; i < resolution; ++i) {
      v[i] = (resolution == 1) ? lo : lo + (hi - lo) * i / (resolution - 1);
    }
    return v;
  };
  grid.a_values = axis(a_min, a_max);
  grid.b_values = axis(b_min, b_max);
  grid.phi.resize(resolution, resolution);

  std::vector<double> samples(basis1.samples().size());
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      for (std::size_t m = 0; m < samples.size(); ++m) {
        samples[m] = grid.a_values[i] * basis1.samples()[m] +
                     grid.b_values[j] * basis2.samples()[m];
      }
      try {
        const ControlSignal w(basis1.t_final(), samples);
        grid.phi(i, j) = fidelity(endpoint_map(sys, x0, w, config).x_final, goal);
      } catch (const IntegrationFailure&) {
        grid.phi(i, j) = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return grid;
}

}  // namespace landscape
