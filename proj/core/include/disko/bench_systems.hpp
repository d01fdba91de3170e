#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace disko {

// d/dt [theta, omega] = [omega, g sin(theta) + beta omega (+ u)].
// With the textbook-verbatim g = +9.81 the origin is the inverted (unstable)
// equilibrium and theta = pi the hanging one; g = -9.81 relabels the origin
// as the hanging equilibrium.
struct PendulumParams {
  double g = 9.81;
  double beta = 0.0;
  double dt = 0.02;
};

Eigen::Vector2d pendulum_derivative(const PendulumParams& p, const Eigen::Vector2d& s);
Eigen::Vector2d pendulum_derivative(const PendulumParams& p, const Eigen::Vector2d& s,
                                    double u);

struct IntegrationResult {
  std::vector<Eigen::VectorXd> states;  // s_0 .. s_steps (truncated on blow-up)
  bool truncated = false;
};

IntegrationResult integrate_rk4(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& derivative,
    const Eigen::VectorXd& s0, double dt, int steps);

// Single classical RK4 step (zero-order-hold on anything inside `derivative`).
Eigen::VectorXd rk4_step(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& derivative,
    const Eigen::VectorXd& s, double dt);

// n one-step pairs (s, s+) from uniform initial conditions.
struct TrainingPairs {
  std::vector<Eigen::Vector2d> pre;
  std::vector<Eigen::Vector2d> post;
};

TrainingPairs sample_training_set(const PendulumParams& p, int n,
                                  const std::array<std::pair<double, double>, 2>& ranges,
                                  double dt, std::uint64_t seed);

struct RandomDataSpec {
  int W = 3;
  int P = 5;
  double x_lo = 0.0, x_hi = 10.0;
  double y_lo = 0.0, y_hi = 20.0;
  std::uint64_t seed = 0;
};

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> random_snapshots(const RandomDataSpec& spec);

// (theta + pi) mod 2pi - pi.
double wrap_angle(double theta);

}  // namespace disko
