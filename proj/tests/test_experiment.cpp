#include "landscape/experiment.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "landscape/serialize.hpp"
#include "support/oracles.hpp"

using namespace landscape;

TEST(GenerateSystem, DeterministicForFixedSeed) {
  Rng rng1(4001u);
  Rng rng2(4001u);
  const GeneratedSystem a = generate_system(rng1);
  const GeneratedSystem b = generate_system(rng2);
  EXPECT_EQ(a.rejections, b.rejections);
  EXPECT_EQ(oracles::max_abs_diff(a.system.A, b.system.A), 0.0);
  EXPECT_EQ(oracles::max_abs_diff(a.system.B, b.system.B), 0.0);
  EXPECT_EQ(oracles::max_abs_diff(a.system.C1, b.system.C1), 0.0);
  EXPECT_EQ(oracles::max_abs_diff(a.system.S1, b.system.S1), 0.0);
  EXPECT_EQ(oracles::max_abs_diff(a.system.C2, b.system.C2), 0.0);
  EXPECT_EQ(oracles::max_abs_diff(a.system.S2, b.system.S2), 0.0);
}

TEST(GenerateSystem, AllGeneratedSystemsPassCertification) {
  Rng rng(4003u);
  int total_rejections = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const GeneratedSystem gen = generate_system(rng);
    total_rejections += gen.rejections;
    const CertificateReport report = certify(gen.system);
    ASSERT_TRUE(report.all_passed()) << "system " << i;
  }
  const double acceptance =
      static_cast<double>(n) / static_cast<double>(n + total_rejections);
  EXPECT_GT(acceptance, 0.0);
  EXPECT_LE(acceptance, 1.0);
  RecordProperty("filter_acceptance_rate", std::to_string(acceptance));
}

TEST(GenerateSystem, ImpossibleFilterRaisesAfterRejectionLimit) {
  Rng rng(4007u);
  // A Jacobian bound ~1e6 can never sit below a unit-range margin.
  EXPECT_THROW(generate_system(rng, 1.0, 1e6), GenerationFailure);
}

TEST(InitialControl, PrefixSumDefinition) {
  const ControlSignal w = control_from_noise({0.5, -0.2, 0.1}, 1.0);
  ASSERT_EQ(w.size(), 3);
  EXPECT_DOUBLE_EQ(w.samples()[0], 0.5);
  EXPECT_DOUBLE_EQ(w.samples()[1], 0.3);
  EXPECT_DOUBLE_EQ(w.samples()[2], 0.4);
}

TEST(InitialControl, DeterministicForFixedSeed) {
  Rng rng1(4013u);
  Rng rng2(4013u);
  const ControlSignal a = generate_initial_control(rng1, 64, 1.0);
  const ControlSignal b = generate_initial_control(rng2, 64, 1.0);
  EXPECT_EQ(a.samples(), b.samples());
}

TEST(InitialControl, GaussianNoiseVariantIsFiniteAndDistinct) {
  Rng rng1(4017u);
  Rng rng2(4017u);
  const ControlSignal uniform = generate_initial_control(rng1, 32, 1.0, NoiseKind::Uniform);
  const ControlSignal gaussian = generate_initial_control(rng2, 32, 1.0, NoiseKind::Gaussian);
  EXPECT_NE(uniform.samples(), gaussian.samples());
  for (double s : gaussian.samples()) EXPECT_TRUE(std::isfinite(s));
}

TEST(InitialControl, RandomWalkVarianceGrowsLinearly) {
  // Var(sample_k) for uniform(-1,1) increments is (k+1)/3.
  const int n_paths = 10'000;
  const int length = 64;
  std::vector<double> sum(length, 0.0), sum_sq(length, 0.0);
  Rng rng(4019u);
  for (int p = 0; p < n_paths; ++p) {
    const ControlSignal w = generate_initial_control(rng, length, 1.0);
    for (int k = 0; k < length; ++k) {
      sum[k] += w.samples()[k];
      sum_sq[k] += w.samples()[k] * w.samples()[k];
    }
  }
  for (int k : {15, 31, 63}) {
    const double mean = sum[k] / n_paths;
    const double variance = sum_sq[k] / n_paths - mean * mean;
    const double expected = (k + 1) / 3.0;
    EXPECT_NEAR(variance, expected, 0.15 * expected) << "k = " << k;
  }
}

TEST(RunWithRescue, UnsteerableSystemIsLabeledTrapSuspected) {
  // B = 0 makes the endpoint independent of the control: the flow stalls and
  // no hill-climb proposal can improve the fidelity.
  NonlinearSystem sys =
      NonlinearSystem::linear(Eigen::Matrix2d::Identity() * 0.1, Eigen::Vector2d::Zero());
  const ControlSignal w0 = ControlSignal::constant(0.0, 1.0, 8);
  FlowConfig flow;
  flow.s_max = 1e12;
  flow.stall_window = 10;
  const RunRecord record = run_with_rescue(sys, Eigen::Vector2d(1.0, 1.0), w0,
                                           Goal{Eigen::Vector2d(-1.0, -1.0)}, flow,
                                           /*max_rescue_cycles=*/3,
                                           /*hill_climb_tries=*/20, 17u);
  EXPECT_EQ(record.outcome, RunOutcome::TrapSuspected);
  EXPECT_TRUE(record.rescues.empty());
}

TEST(RunBatch, DeterministicAcrossJobCountsAndReruns) {
  ProtocolConfig config;
  config.n_systems = 2;
  config.n_goals = 2;
  config.n_controls = 2;
  config.master_seed = 4021u;
  config.control_grid_size = 32;

  const BatchResult serial = run_batch(config, 1);
  const BatchResult parallel = run_batch(config, 4);

  json serial_records = json::array();
  json parallel_records = json::array();
  for (const auto& r : serial.records) serial_records.push_back(to_json(r));
  for (const auto& r : parallel.records) parallel_records.push_back(to_json(r));
  EXPECT_EQ(serial_records.dump(), parallel_records.dump());
  EXPECT_EQ(to_json(serial.summary).dump(), to_json(parallel.summary).dump());
}

TEST(RunBatch, OutcomePartitionAndCleanRun) {
  ProtocolConfig config;
  config.n_systems = 3;
  config.n_goals = 2;
  config.n_controls = 2;
  config.master_seed = 4027u;
  config.control_grid_size = 32;

  const BatchResult result = run_batch(config, 2);
  EXPECT_EQ(result.summary.total_runs, 12);
  EXPECT_EQ(result.summary.n_trap_suspected, 0);
  EXPECT_EQ(result.summary.n_aborted, 0);
  EXPECT_NEAR(result.summary.pct_converged + result.summary.pct_timed_out +
                  result.summary.pct_precision_stall,
              100.0, 1e-9);

  int by_outcome[4] = {0, 0, 0, 0};
  for (const auto& record : result.records) {
    ASSERT_FALSE(record.error.has_value());
    ++by_outcome[static_cast<int>(record.record.outcome)];
    const bool converged = record.record.outcome == RunOutcome::Converged;
    EXPECT_EQ(converged,
              record.record.final_distance < config.flow.convergence_threshold);
  }
  EXPECT_EQ(by_outcome[0] + by_outcome[1] + by_outcome[2] + by_outcome[3], 12);
}

TEST(LandscapeGrid, DriftSystemMatchesClosedFormCone) {
  // A = 0, f = 0: x(T) = x0 + (a c1 + b c2) B with c_i the exact trapezoid
  // integral of the basis samples.
  NonlinearSystem sys = NonlinearSystem::linear(Eigen::Matrix2d::Zero(), Eigen::Vector2d(1.0, 0.5));
  Rng rng(4049u);
  const ControlSignal basis1 = generate_initial_control(rng, 16, 1.0);
  const ControlSignal basis2 = generate_initial_control(rng, 16, 1.0);
  const Eigen::Vector2d x0(0.3, -0.2);
  const Goal goal{Eigen::Vector2d(0.9, 0.4)};

  auto integral = [](const ControlSignal& w) {
    const auto& s = w.samples();
    double acc = 0.5 * (s.front() + s.back());
    for (std::size_t k = 1; k + 1 < s.size(); ++k) acc += s[k];
    return acc * w.dt();
  };
  const double c1 = integral(basis1);
  const double c2 = integral(basis2);

  const LandscapeGrid grid =
      landscape_grid(sys, x0, goal, basis1, basis2, -1.0, 1.0, -0.5, 0.5, 5);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const double drift = grid.a_values[i] * c1 + grid.b_values[j] * c2;
      const Eigen::Vector2d x_final = x0 + drift * Eigen::Vector2d(1.0, 0.5);
      EXPECT_NEAR(grid.phi(i, j), -(x_final - goal.point).norm(), 1e-7);
    }
  }
}

TEST(LandscapeGrid, ResolutionOneIsSingleEvaluation) {
  Rng rng(4051u);
  const NonlinearSystem sys = generate_system(rng).system.as_system();
  const ControlSignal basis1 = generate_initial_control(rng, 16, 1.0);
  const ControlSignal basis2 = generate_initial_control(rng, 16, 1.0);
  const Eigen::Vector2d x0(0.0, 0.0);
  const Goal goal{Eigen::Vector2d(1.0, 1.0)};

  const LandscapeGrid grid =
      landscape_grid(sys, x0, goal, basis1, basis2, 0.7, 0.7, -0.3, -0.3, 1);
  ASSERT_EQ(grid.phi.rows(), 1);

  std::vector<double> samples(basis1.samples().size());
  for (std::size_t m = 0; m < samples.size(); ++m) {
    samples[m] = 0.7 * basis1.samples()[m] - 0.3 * basis2.samples()[m];
  }
  const ControlSignal w(1.0, samples);
  const double expected = fidelity(endpoint_map(sys, x0, w).x_final, goal);
  EXPECT_DOUBLE_EQ(grid.phi(0, 0), expected);
}

TEST(LandscapeGrid, CoarseMaximumAgreesWithRefinedGrid) {
  Rng rng(4057u);
  const NonlinearSystem sys = generate_system(rng).system.as_system();
  const ControlSignal basis1 = generate_initial_control(rng, 16, 1.0);
  const ControlSignal basis2 = generate_initial_control(rng, 16, 1.0);
  const Eigen::Vector2d x0(0.0, 0.0);
  const Goal goal{Eigen::Vector2d(0.8, -0.6)};

  // 4x refinement over the same window; the coarse nodes are a subset of the
  // fine nodes, so the coarse maximum can only be matched or exceeded.
  const LandscapeGrid coarse =
      landscape_grid(sys, x0, goal, basis1, basis2, -2.0, 2.0, -2.0, 2.0, 11);
  const LandscapeGrid fine =
      landscape_grid(sys, x0, goal, basis1, basis2, -2.0, 2.0, -2.0, 2.0, 41);
  const double coarse_max = coarse.phi.maxCoeff();
  const double fine_max = fine.phi.maxCoeff();
  EXPECT_LE(coarse_max, fine_max + 1e-12);

  // The refined maximum stays within one coarse cell's worth of the measured
  // landscape modulus around the coarse maximum.
  double steepness = 0.0;
  const double h = fine.a_values[1] - fine.a_values[0];
  for (int i = 0; i + 1 < 41; ++i) {
    for (int j = 0; j + 1 < 41; ++j) {
      steepness = std::max(steepness, std::abs(fine.phi(i + 1, j) - fine.phi(i, j)) / h);
      steepness = std::max(steepness, std::abs(fine.phi(i, j + 1) - fine.phi(i, j)) / h);
    }
  }
  const double coarse_cell = coarse.a_values[1] - coarse.a_values[0];
  EXPECT_LE(fine_max - coarse_max, steepness * coarse_cell + 1e-9);
}

TEST(LandscapeGrid, IntegratorFailuresBecomeMissingCells) {
  Rng rng(4061u);
  const NonlinearSystem sys = generate_system(rng).system.as_system();
  const ControlSignal basis1 = generate_initial_control(rng, 8, 1.0);
  const ControlSignal basis2 = generate_initial_control(rng, 8, 1.0);
  IntegratorConfig starved;
  starved.max_steps = 2;
  const LandscapeGrid grid =
      landscape_grid(sys, Eigen::Vector2d::Zero(), Goal{Eigen::Vector2d(1, 1)}, basis1,
                     basis2, -1, 1, -1, 1, 3, starved);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_TRUE(std::isnan(grid.phi(i, j)));
  }
}

TEST(LandscapeGrid, RejectsDependentBasis) {
  NonlinearSystem sys = NonlinearSystem::linear(Eigen::Matrix2d::Zero(), Eigen::Vector2d(1, 0));
  const ControlSignal basis = ControlSignal::constant(1.0, 1.0, 8);
  const ControlSignal scaled = ControlSignal::constant(2.0, 1.0, 8);
  EXPECT_THROW(landscape_grid(sys, Eigen::Vector2d::Zero(), Goal{Eigen::Vector2d(1, 1)}, basis,
                              scaled, -1, 1, -1, 1, 3),
               std::invalid_argument);
}

TEST(ProtocolConfig, Validation) {
  ProtocolConfig config;
  config.n_systems = 0;
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config = ProtocolConfig{};
  config.trig_range = 0.0;
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config = ProtocolConfig{};
  config.control_grid_size = 1;
  EXPECT_THROW(config.validate(), std::invalid_argument);
}

TEST(DeriveSeed, DistinctTuplesGiveDistinctSeeds) {
  const std::uint64_t base = derive_seed(1, 2, 3, 4);
  EXPECT_NE(base, derive_seed(1, 2, 3, 5));
  EXPECT_NE(base, derive_seed(1, 2, 4, 3));
  EXPECT_NE(base, derive_seed(2, 2, 3, 4));
  EXPECT_EQ(base, derive_seed(1, 2, 3, 4));
}
