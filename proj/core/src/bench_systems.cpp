#include "disko/bench_systems.hpp"

#include <cmath>
#include <random>

#include "disko/errors.hpp"

namespace disko {

Eigen::Vector2d pendulum_derivative(const PendulumParams& p, const Eigen::Vector2d& s) {
  return {s[1], p.g * std::sin(s[0]) + p.beta * s[1]};
}

Eigen::Vector2d pendulum_derivative(const PendulumParams& p, const Eigen::Vector2d& s,
                                    double u) {
  return {s[1], p.g * std::sin(s[0]) + p.beta * s[1] + u};
}

Eigen::VectorXd rk4_step(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& derivative,
    const Eigen::VectorXd& s, double dt) {
  Eigen::VectorXd k1 = derivative(s);
  Eigen::VectorXd k2 = derivative(s + 0.5 * dt * k1);
  Eigen::VectorXd k3 = derivative(s + 0.5 * dt * k2);
  Eigen::VectorXd k4 = derivative(s + dt * k3);
  return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

IntegrationResult integrate_rk4(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& derivative,
    const Eigen::VectorXd& s0, double dt, int steps) {
  if (!(dt > 0.0)) throw config_error("integration step must be positive");
  if (steps < 0) throw config_error("step count must be nonnegative");
  IntegrationResult res;
  res.states.reserve(steps + 1);
  res.states.push_back(s0);
  for (int k = 0; k < steps; ++k) {
    Eigen::VectorXd next = rk4_step(derivative, res.states.back(), dt);
    if (!next.allFinite() || next.norm() > 1e12) {
      res.truncated = true;
      break;
    }
    res.states.push_back(std::move(next));
  }
  return res;
}

TrainingPairs sample_training_set(const PendulumParams& p, int n,
                                  const std::array<std::pair<double, double>, 2>& ranges,
                                  double dt, std::uint64_t seed) {
  if (n <= 0) throw config_error("training set size must be positive");
  if (!(dt > 0.0)) throw config_error("sampling interval must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d_theta(ranges[0].first, ranges[0].second);
  std::uniform_real_distribution<double> d_omega(ranges[1].first, ranges[1].second);
  auto deriv = [&](const Eigen::VectorXd& s) -> Eigen::VectorXd {
    return pendulum_derivative(p, Eigen::Vector2d(s[0], s[1]));
  };
  TrainingPairs pairs;
  pairs.pre.reserve(n);
  pairs.post.reserve(n);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector2d s(d_theta(rng), d_omega(rng));
    Eigen::VectorXd next = rk4_step(deriv, s, dt);
    pairs.pre.push_back(s);
    pairs.post.push_back(Eigen::Vector2d(next[0], next[1]));
  }
  return pairs;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> random_snapshots(const RandomDataSpec& spec) {
  if (spec.W <= 0 || spec.P <= 0)
    throw config_error("random snapshot dimensions must be positive");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> dx(spec.x_lo, spec.x_hi);
  std::uniform_real_distribution<double> dy(spec.y_lo, spec.y_hi);
  Eigen::MatrixXd X(spec.W, spec.P), Y(spec.W, spec.P);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = dx(rng);
  for (Eigen::Index i = 0; i < Y.rows(); ++i)
    for (Eigen::Index j = 0; j < Y.cols(); ++j) Y(i, j) = dy(rng);
  return {std::move(X), std::move(Y)};
}

double wrap_angle(double theta) {
  double w = std::fmod(theta + M_PI, 2.0 * M_PI);
  if (w < 0.0) w += 2.0 * M_PI;
  return w - M_PI;
}

}  // namespace disko
