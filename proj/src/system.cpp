#include "landscape/system.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace landscape {

ControlSignal::ControlSignal(double t_final, std::vector<double> samples)
    : t_final_(t_final), samples_(std::move(samples)) {
  if (!(t_final_ > 0.0)) throw std::invalid_argument("ControlSignal: t_final must be > 0");
  if (samples_.size() < 2) throw std::invalid_argument("ControlSignal: need at least 2 samples");
  for (double s : samples_) {
    if (!std::isfinite(s)) throw std::invalid_argument("ControlSignal: non-finite sample");
  }
}

ControlSignal ControlSignal::constant(double value, double t_final, int n_samples) {
  return ControlSignal(t_final, std::vector<double>(static_cast<std::size_t>(n_samples), value));
}

double ControlSignal::value(double t) const {
  if (t < 0.0 || t > t_final_) {
    throw std::domain_error("ControlSignal::value: t outside [0, T]");
  }
  const int n = size();
  const double step = dt();
  int k = static_cast<int>(std::floor(t / step));
  k = std::clamp(k, 0, n - 2);
  const double frac = (t - k * step) / step;
  return samples_[k] + frac * (samples_[k + 1] - samples_[k]);
}

std::vector<double> ControlSignal::grid_times() const {
  std::vector<double> times(samples_.size());
  for (int k = 0; k < size(); ++k) times[k] = grid_time(k);
  times.back() = t_final_;
  return times;
}

double ControlSignal::rms() const {
  double acc = 0.0;
  for (double s : samples_) acc += s * s;
  return std::sqrt(acc / static_cast<double>(samples_.size()));
}

NonlinearSystem NonlinearSystem::linear(Eigen::MatrixXd A, Eigen::VectorXd B) {
  NonlinearSystem sys;
  sys.A = std::move(A);
  sys.B = std::move(B);
  return sys;
}

void NonlinearSystem::validate() const {
  if (A.rows() != A.cols()) throw std::invalid_argument("NonlinearSystem: A must be square");
  if (B.size() != A.rows()) throw std::invalid_argument("NonlinearSystem: B/A dimension mismatch");
}

Eigen::Vector2d TrigSystem::f(const Eigen::Vector2d& x) const {
  const Eigen::Vector2d c1(std::cos(x[0]), std::cos(x[1]));
  const Eigen::Vector2d s1(std::sin(x[0]), std::sin(x[1]));
  const Eigen::Vector2d c2(std::cos(2 * x[0]), std::cos(2 * x[1]));
  const Eigen::Vector2d s2(std::sin(2 * x[0]), std::sin(2 * x[1]));
  return C1 * c1 + S1 * s1 + C2 * c2 + S2 * s2;
}

Eigen::Matrix2d TrigSystem::df(const Eigen::Vector2d& x) const {
  // Columns scale with the derivative of each componentwise trig term.
  const Eigen::Vector2d dc1(-std::sin(x[0]), -std::sin(x[1]));
  const Eigen::Vector2d ds1(std::cos(x[0]), std::cos(x[1]));
  const Eigen::Vector2d dc2(-2 * std::sin(2 * x[0]), -2 * std::sin(2 * x[1]));
  const Eigen::Vector2d ds2(2 * std::cos(2 * x[0]), 2 * std::cos(2 * x[1]));
  return C1 * dc1.asDiagonal() + S1 * ds1.asDiagonal() + C2 * dc2.asDiagonal() +
         S2 * ds2.asDiagonal();
}

NonlinearSystem TrigSystem::as_system() const {
  NonlinearSystem sys;
  sys.A = A;
  sys.B = B;
  TrigSystem self = *this;
  sys.f = [self](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return self.f(Eigen::Vector2d(x[0], x[1]));
  };
  sys.df = [self](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    return self.df(Eigen::Vector2d(x[0], x[1]));
  };
  return sys;
}

EndpointResult endpoint_map(const NonlinearSystem& sys, const Eigen::VectorXd& x0,
                            const ControlSignal& w, const IntegratorConfig& config) {
  sys.validate();
  if (x0.size() != sys.dim()) {
    throw std::invalid_argument("endpoint_map: x0 dimension mismatch");
  }
  const double t_final = w.t_final();
  // Clamp stage times that rounding pushes past the span boundary.
  VectorField rhs = [&sys, &w, t_final](double t, const Eigen::VectorXd& x,
                                        Eigen::VectorXd& dxdt) {
    dxdt = sys.A * x + sys.B * w.value(std::clamp(t, 0.0, t_final));
    if (sys.f) dxdt += sys.f(x);
  };
  // The interpolated control has slope kinks at the sample times; stepping
  // onto them keeps the error estimate honest for rough controls.
  DenseOutput traj = integrate(rhs, x0, w.grid_times(), config);
  return EndpointResult{traj.final_state(), std::move(traj)};
}

double fidelity(const Eigen::VectorXd& x_final, const Goal& goal) {
  if (x_final.size() != goal.point.size()) {
    throw std::invalid_argument("fidelity: dimension mismatch");
  }
  return -(x_final - goal.point).norm();
}

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.rows() == 2 && m.cols() == 2) {
    const Eigen::Matrix2d g = m.transpose() * m;
    const double mean = 0.5 * (g(0, 0) + g(1, 1));
    const double disc = std::sqrt(0.25 * (g(0, 0) - g(1, 1)) * (g(0, 0) - g(1, 1)) +
                                  g(0, 1) * g(0, 1));
    return std::sqrt(std::max(0.0, mean + disc));
  }
  return m.jacobiSvd().singularValues()(0);
}

double jacobian_consistency_error(const NonlinearSystem& sys,
                                  const std::vector<Eigen::VectorXd>& points) {
  double worst = 0.0;
  for (const auto& x : points) {
    const double h = 1e-6 * (1.0 + x.norm());
    const Eigen::MatrixXd jac = sys.df_at(x);
    const double scale = std::max(1.0, jac.norm());
    for (int j = 0; j < sys.dim(); ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const Eigen::VectorXd col = (sys.f_at(xp) - sys.f_at(xm)) / (2.0 * h);
      worst = std::max(worst, (col - jac.col(j)).norm() / scale);
    }
  }
  return worst;
}

}  // namespace landscape
