#include "landscape/odeint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace landscape {

namespace {

// Dormand-Prince 5(4) tableau. The propagated solution is the 5th-order one;
// the error estimate is the difference to the embedded 4th-order solution.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187, kA53 = 64448.0 / 6561,
                 kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33, kA63 = 46732.0 / 5247,
                 kA64 = 49.0 / 176, kA65 = -5103.0 / 18656;
constexpr double kB1 = 35.0 / 384, kB3 = 500.0 / 1113, kB4 = 125.0 / 192,
                 kB5 = -2187.0 / 6784, kB6 = 11.0 / 84;
constexpr double kE1 = 71.0 / 57600, kE3 = -71.0 / 16695, kE4 = 71.0 / 1920,
                 kE5 = -17253.0 / 339200, kE6 = 22.0 / 525, kE7 = -1.0 / 40;

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;

double scaled_rms(const Eigen::VectorXd& err, const Eigen::VectorXd& y0,
                  const Eigen::VectorXd& y1, double rel_tol, double abs_tol) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double scale = abs_tol + rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = err[i] / scale;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

// Hairer-style automatic initial step selection.
double initial_step_guess(const VectorField& rhs, double t0, const Eigen::VectorXd& y0,
                          double direction, double span, double rel_tol, double abs_tol) {
  const Eigen::Index n = y0.size();
  Eigen::VectorXd f0(n), f1(n), scale(n);
  rhs(t0, y0, f0);
  for (Eigen::Index i = 0; i < n; ++i) scale[i] = abs_tol + rel_tol * std::abs(y0[i]);

  const double d0 = std::sqrt((y0.array() / scale.array()).square().mean());
  const double d1 = std::sqrt((f0.array() / scale.array()).square().mean());
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);

  Eigen::VectorXd y1 = y0 + direction * h0 * f0;
  rhs(t0 + direction * h0, y1, f1);
  const double d2 =
      std::sqrt(((f1 - f0).array() / scale.array()).square().mean()) / h0;

  double h1;
  if (std::max(d1, d2) <= 1e-15) {
    h1 = std::max(1e-6, h0 * 1e-3);
  } else {
    h1 = std::pow(0.01 / std::max(d1, d2), 0.2);
  }
  return std::min({100.0 * h0, h1, span});
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(rel_tol > 0.0)) throw std::invalid_argument("IntegratorConfig: rel_tol must be > 0");
  if (!(abs_tol > 0.0)) throw std::invalid_argument("IntegratorConfig: abs_tol must be > 0");
  if (max_steps < 1) throw std::invalid_argument("IntegratorConfig: max_steps must be >= 1");
  if (method == IntegratorMethod::FixedRk4 && !(initial_step > 0.0)) {
    throw std::invalid_argument("IntegratorConfig: FixedRk4 requires initial_step > 0");
  }
}

DenseOutput::DenseOutput(std::vector<double> grid, std::vector<Eigen::VectorXd> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (grid_.size() != values_.size() || grid_.size() < 2) {
    throw std::invalid_argument("DenseOutput: grid/value size mismatch");
  }
}

Eigen::VectorXd DenseOutput::at(double t) const {
  const bool forward = grid_.back() > grid_.front();
  const double lo = forward ? grid_.front() : grid_.back();
  const double hi = forward ? grid_.back() : grid_.front();
  if (t < lo || t > hi) {
    throw std::domain_error("DenseOutput::at: time outside integration span");
  }
  // Index of the first node at or past t in integration order.
  std::size_t k;
  if (forward) {
    k = std::lower_bound(grid_.begin(), grid_.end(), t) - grid_.begin();
  } else {
    k = std::lower_bound(grid_.begin(), grid_.end(), t, std::greater<double>()) -
        grid_.begin();
  }
  if (k == 0) return values_.front();
  if (k >= grid_.size()) return values_.back();
  const double t0 = grid_[k - 1];
  const double t1 = grid_[k];
  if (t == t1) return values_[k];
  const double frac = (t - t0) / (t1 - t0);
  return values_[k - 1] + frac * (values_[k] - values_[k - 1]);
}

Stepper::Stepper(VectorField rhs, double t0, Eigen::VectorXd x0, IntegratorConfig config)
    : rhs_(std::move(rhs)), config_(config), t_(t0), x_(std::move(x0)) {
  config_.validate();
  const Eigen::Index n = x_.size();
  for (auto& k : k_) k.resize(n);
  x_trial_.resize(n);
  err_vec_.resize(n);
  if (config_.method == IntegratorMethod::FixedRk4) h_ = config_.initial_step;
}

bool Stepper::advance(double t_end) {
  if (t_ == t_end) return false;
  if (config_.method == IntegratorMethod::FixedRk4) {
    rk4_step(t_end);
  } else {
    rk45_step(t_end);
  }
  ++accepted_;
  return true;
}

void Stepper::rk4_step(double t_end) {
  if (accepted_ >= config_.max_steps) {
    throw IntegrationFailure("fixed-rk4: max_steps exceeded", t_);
  }
  const double direction = (t_end > t_) ? 1.0 : -1.0;
  const double h = direction * std::min(h_, std::abs(t_end - t_));
  auto& k1 = k_[0];
  auto& k2 = k_[1];
  auto& k3 = k_[2];
  auto& k4 = k_[3];
  rhs_(t_, x_, k1);
  rhs_(t_ + 0.5 * h, x_ + 0.5 * h * k1, k2);
  rhs_(t_ + 0.5 * h, x_ + 0.5 * h * k2, k3);
  rhs_(t_ + h, x_ + h * k3, k4);
  x_ += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  t_ = (std::abs(t_end - t_) <= std::abs(h)) ? t_end : t_ + h;
}

void Stepper::rk45_step(double t_end) {
  const double direction = (t_end > t_) ? 1.0 : -1.0;
  const double span = std::abs(t_end - t_);
  if (h_ == 0.0) {
    h_ = (config_.initial_step > 0.0)
             ? config_.initial_step
             : initial_step_guess(rhs_, t_, x_, direction, span, config_.rel_tol,
                                  config_.abs_tol);
    have_k1_ = false;
  }

  while (true) {
    if (attempts_++ >= config_.max_steps) {
      throw IntegrationFailure("rk45: max_steps exceeded", t_);
    }
    const double remaining = std::abs(t_end - t_);
    const double h_mag = std::min(h_, remaining);
    if (h_mag <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t_), 1.0)) {
      throw IntegrationFailure("rk45: step size underflow", t_);
    }
    const double h = direction * h_mag;
    const bool final_step = (h_mag == remaining);

    if (!have_k1_) rhs_(t_, x_, k_[0]);
    rhs_(t_ + kC[1] * h, x_ + h * (kA21 * k_[0]), k_[1]);
    rhs_(t_ + kC[2] * h, x_ + h * (kA31 * k_[0] + kA32 * k_[1]), k_[2]);
    rhs_(t_ + kC[3] * h, x_ + h * (kA41 * k_[0] + kA42 * k_[1] + kA43 * k_[2]), k_[3]);
    rhs_(t_ + kC[4] * h,
         x_ + h * (kA51 * k_[0] + kA52 * k_[1] + kA53 * k_[2] + kA54 * k_[3]), k_[4]);
    rhs_(t_ + h,
         x_ + h * (kA61 * k_[0] + kA62 * k_[1] + kA63 * k_[2] + kA64 * k_[3] + kA65 * k_[4]),
         k_[5]);
    x_trial_ = x_ + h * (kB1 * k_[0] + kB3 * k_[2] + kB4 * k_[3] + kB5 * k_[4] + kB6 * k_[5]);
    rhs_(t_ + h, x_trial_, k_[6]);  // FSAL stage

    err_vec_ = h * (kE1 * k_[0] + kE3 * k_[2] + kE4 * k_[3] + kE5 * k_[4] + kE6 * k_[5] +
                    kE7 * k_[6]);
    const double err = scaled_rms(err_vec_, x_, x_trial_, config_.rel_tol, config_.abs_tol);
    if (!std::isfinite(err)) {
      h_ = h_mag * kMinFactor;
      have_k1_ = true;
      continue;
    }

    if (err <= 1.0) {
      t_ = final_step ? t_end : t_ + h;
      x_.swap(x_trial_);
      k_[0].swap(k_[6]);  // reuse the FSAL stage
      have_k1_ = true;
      const double factor =
          (err == 0.0) ? kMaxFactor
                       : std::clamp(kSafety * std::pow(err, -0.2), kMinFactor, kMaxFactor);
      if (!final_step) h_ = h_mag * factor;
      return;
    }
    h_ = h_mag * std::clamp(kSafety * std::pow(err, -0.2), kMinFactor, 1.0);
    have_k1_ = true;  // k1 is still f(t_, x_)
  }
}

DenseOutput integrate(const VectorField& rhs, const Eigen::VectorXd& x0, double t0,
                      double t1, const IntegratorConfig& config) {
  return integrate(rhs, x0, std::vector<double>{t0, t1}, config);
}

DenseOutput integrate(const VectorField& rhs, const Eigen::VectorXd& x0,
                      const std::vector<double>& checkpoints, const IntegratorConfig& config) {
  config.validate();
  if (checkpoints.size() < 2) {
    throw std::invalid_argument("integrate: need at least two checkpoints");
  }
  const bool forward = checkpoints.back() > checkpoints.front();
  for (std::size_t i = 1; i < checkpoints.size(); ++i) {
    if (forward ? checkpoints[i] <= checkpoints[i - 1] : checkpoints[i] >= checkpoints[i - 1]) {
      throw std::invalid_argument("integrate: checkpoints must be strictly monotone");
    }
  }
  Stepper stepper(rhs, checkpoints.front(), x0, config);
  std::vector<double> grid{checkpoints.front()};
  std::vector<Eigen::VectorXd> values{x0};
  for (std::size_t i = 1; i < checkpoints.size(); ++i) {
    while (stepper.advance(checkpoints[i])) {
      grid.push_back(stepper.time());
      values.push_back(stepper.state());
    }
  }
  return DenseOutput(std::move(grid), std::move(values));
}

}  // namespace landscape
