#include "landscape/certify.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "landscape/experiment.hpp"
#include "landscape/rng.hpp"
#include "support/oracles.hpp"

using namespace landscape;

namespace {

Eigen::Matrix2d shift_matrix() {
  Eigen::Matrix2d a;
  a << 0, 1, 0, 0;
  return a;
}

}  // namespace

TEST(KalmanMatrix, DirectExamples) {
  const Eigen::MatrixXd k1 = kalman_matrix(shift_matrix(), Eigen::Vector2d(0, 1));
  Eigen::Matrix2d expected1;
  expected1 << 0, 1, 1, 0;
  EXPECT_EQ(oracles::max_abs_diff(k1, expected1), 0.0);

  const Eigen::MatrixXd k2 =
      kalman_matrix(Eigen::Matrix2d::Identity(), Eigen::Vector2d(1, 0));
  Eigen::Matrix2d expected2;
  expected2 << 1, 1, 0, 0;
  EXPECT_EQ(oracles::max_abs_diff(k2, expected2), 0.0);
}

TEST(KalmanMatrix, ColumnsMatchRepeatedMultiplication) {
  Rng rng(101u);
  Eigen::MatrixXd a(4, 4);
  Eigen::VectorXd b(4);
  for (int i = 0; i < 4; ++i) {
    b[i] = rng.uniform(-1, 1);
    for (int j = 0; j < 4; ++j) a(i, j) = rng.uniform(-1, 1);
  }
  const Eigen::MatrixXd k = kalman_matrix(a, b);
  Eigen::VectorXd column = b;
  for (int j = 0; j < 4; ++j) {
    EXPECT_LT((k.col(j) - column).norm(), 1e-14);
    column = a * column;
  }
}

TEST(ControllabilityRank, Examples) {
  const RankResult full = controllability_rank(shift_matrix(), Eigen::Vector2d(0, 1));
  EXPECT_EQ(full.rank, 2);
  EXPECT_TRUE(full.controllable);

  const RankResult deficient =
      controllability_rank(Eigen::Matrix2d::Identity(), Eigen::Vector2d(1, 0));
  EXPECT_EQ(deficient.rank, 1);
  EXPECT_FALSE(deficient.controllable);
}

TEST(ControllabilityRank, RandomPairsAreGenericallyControllable) {
  Rng rng(211u);
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::Matrix2d a;
    for (int i = 0; i < 4; ++i) a(i / 2, i % 2) = rng.uniform(-1, 1);
    const Eigen::Vector2d b(rng.uniform(-1, 1), rng.uniform(-1, 1));
    EXPECT_TRUE(controllability_rank(a, b).controllable) << "trial " << trial;
  }
}

TEST(LocalMargin, ClosedFormExamples) {
  // AB = [1, 0]', orthogonal to B: minimum at lambda = 0.
  EXPECT_DOUBLE_EQ(local_margin(shift_matrix(), Eigen::Vector2d(0, 1)), 1.0);
  // B an eigenvector: the margin collapses.
  EXPECT_NEAR(local_margin(Eigen::Matrix2d::Identity(), Eigen::Vector2d(0.4, -0.9)), 0.0,
              1e-15);
  EXPECT_THROW(local_margin(shift_matrix(), Eigen::Vector2d(0, 0)), std::invalid_argument);
}

TEST(LocalMargin, AgreesWithGridMinimization) {
  Rng rng(223u);
  for (int trial = 0; trial < 30; ++trial) {
    Eigen::Matrix2d a;
    for (int i = 0; i < 4; ++i) a(i / 2, i % 2) = rng.uniform(-1, 1);
    const Eigen::Vector2d b(rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (b.norm() < 1e-6) continue;
    EXPECT_NEAR(local_margin(a, b), oracles::brute_force_margin(a, b), 1e-6);
  }
}

TEST(LocalMargin, ScaleRelations) {
  Rng rng(227u);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Matrix2d a;
    for (int i = 0; i < 4; ++i) a(i / 2, i % 2) = rng.uniform(-1, 1);
    const Eigen::Vector2d b(rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (b.norm() < 1e-3) continue;
    const double base = local_margin(a, b);
    for (double c : {0.5, 2.0, 10.0}) {
      // m(A, cB) = m(A, B) implies the returned threshold scales as 1/c.
      EXPECT_NEAR(local_margin(a, (c * b).eval()), base / c, 1e-10 * std::max(1.0, base));
      EXPECT_NEAR(local_margin(a, (c * b).eval()) * (c * b).norm(), base * b.norm(),
                  1e-10 * std::max(1.0, base));
    }
  }
}

TEST(LocalMargin, PositiveForControllablePairs) {
  Rng rng(229u);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::Matrix2d a;
    for (int i = 0; i < 4; ++i) a(i / 2, i % 2) = rng.uniform(-1, 1);
    const Eigen::Vector2d b(rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (!controllability_rank(a, b).controllable) continue;
    EXPECT_GT(local_margin(a, b), 0.0);
  }
}

TEST(TrigBounds, DisplayedFormulas) {
  TrigSystem sys;
  sys.A = shift_matrix();
  sys.B = Eigen::Vector2d(0, 1);
  EXPECT_DOUBLE_EQ(trig_nonlinear_bound(sys), 0.0);
  EXPECT_DOUBLE_EQ(trig_df_bound(sys), 0.0);

  sys.C1 = 0.1 * Eigen::Matrix2d::Identity();
  EXPECT_NEAR(trig_nonlinear_bound(sys), 0.2, 1e-15);
  sys.C1.setZero();
  sys.S2 = 0.05 * Eigen::Matrix2d::Identity();
  EXPECT_NEAR(trig_df_bound(sys), std::sqrt(2.0) * 0.1, 1e-15);
}

TEST(TrigBounds, MonteCarloSupsNeverExceedBounds) {
  Rng seeds(233u);
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(seeds.next_u64());
    const TrigSystem sys = generate_system(rng).system;
    const double f_bound = trig_nonlinear_bound(sys);
    const double df_bound = trig_df_bound(sys);
    Rng points(seeds.next_u64());
    double f_sup = 0.0, df_sup = 0.0;
    for (int i = 0; i < 10'000; ++i) {
      const Eigen::Vector2d x(points.uniform(-10, 10), points.uniform(-10, 10));
      f_sup = std::max(f_sup, sys.f(x).norm());
      df_sup = std::max(df_sup, spectral_norm(sys.df(x)));
    }
    EXPECT_LE(f_sup, f_bound);
    EXPECT_LE(df_sup, df_bound);
  }
}

TEST(Certify, GeneratedSystemsPassAllCertificates) {
  Rng rng(239u);
  for (int trial = 0; trial < 50; ++trial) {
    const TrigSystem sys = generate_system(rng).system;
    const CertificateReport report = certify(sys);
    EXPECT_TRUE(report.controllable_linear_part);
    EXPECT_TRUE(report.local_controllability_certified);
    EXPECT_TRUE(report.all_passed());
    ASSERT_TRUE(report.df_bound && report.local_margin);
    EXPECT_LT(*report.df_bound, *report.local_margin);
  }
}

TEST(Certify, UncontrollableLinearPartReported) {
  TrigSystem sys;
  sys.A = Eigen::Matrix2d::Identity();
  sys.B = Eigen::Vector2d(1, 0);
  const CertificateReport report = certify(sys);
  EXPECT_FALSE(report.controllable_linear_part);
  EXPECT_EQ(report.kalman_rank, 1);
  EXPECT_FALSE(report.all_passed());
}

TEST(Certify, OversizedNonlinearityFailsLocalCertificate) {
  TrigSystem sys;
  sys.A = shift_matrix();
  sys.B = Eigen::Vector2d(0, 1);  // margin is exactly 1
  sys.C1 = 10.0 * Eigen::Matrix2d::Identity();
  const CertificateReport report = certify(sys);
  EXPECT_TRUE(report.controllable_linear_part);
  EXPECT_FALSE(report.local_controllability_certified);
  EXPECT_GT(*report.df_bound, *report.local_margin);
}

TEST(TrajectoryKalmanCheck, LinearCases) {
  const ControlSignal w = ControlSignal::constant(0.5, 1.0, 16);
  NonlinearSystem controllable =
      NonlinearSystem::linear(shift_matrix(), Eigen::Vector2d(0, 1));
  const DenseOutput traj =
      endpoint_map(controllable, Eigen::Vector2d(0.2, -0.1), w).trajectory;
  EXPECT_TRUE(trajectory_kalman_check(controllable, traj));

  NonlinearSystem uncontrollable =
      NonlinearSystem::linear(Eigen::Matrix2d::Identity(), Eigen::Vector2d(1, 0));
  const DenseOutput traj2 =
      endpoint_map(uncontrollable, Eigen::Vector2d(0.2, -0.1), w).trajectory;
  EXPECT_FALSE(trajectory_kalman_check(uncontrollable, traj2));
}

TEST(TrajectoryKalmanCheck, CertifiedSystemsPassAlongRandomTrajectories) {
  Rng rng(241u);
  for (int trial = 0; trial < 10; ++trial) {
    const TrigSystem trig = generate_system(rng).system;
    const NonlinearSystem sys = trig.as_system();
    const ControlSignal w = generate_initial_control(rng, 64, 1.0);
    const DenseOutput traj = endpoint_map(sys, Eigen::Vector2d::Zero(), w).trajectory;
    EXPECT_TRUE(trajectory_kalman_check(sys, traj));

    const CertificateReport report = certify(trig, &traj);
    ASSERT_TRUE(report.trajectory_check.has_value());
    EXPECT_TRUE(*report.trajectory_check);
  }
}
