#pragma once

#include <Eigen/Dense>

#include "syncdmpc/common.hpp"

namespace syncdmpc {

/// Kinematic bicycle state. Heading stays unwrapped.
struct VehicleState {
  double x = 0.0;    // [m]
  double y = 0.0;    // [m]
  double psi = 0.0;  // [rad]
  double v = 0.0;    // [m/s]

  Eigen::Vector4d vec() const { return {x, y, psi, v}; }
  static VehicleState from(const Eigen::Vector4d& s) { return {s(0), s(1), s(2), s(3)}; }
};

struct VehicleInput {
  double a = 0.0;      // [m/s^2]
  double delta = 0.0;  // [rad]

  Eigen::Vector2d vec() const { return {a, delta}; }
  static VehicleInput from(const Eigen::Vector2d& u) { return {u(0), u(1)}; }
};

/// Geometry, discretization and box bounds. Defaults suit 1:18 scale cars.
struct VehicleParams {
  double wheelbase = 0.15;  // [m]
  double length = 0.22;     // [m], collision threshold during rollout
  double dt = 0.2;          // [s]
  double v_min = 0.0;
  double v_max = 1.5;
  double a_min = -1.5;
  double a_max = 1.0;
  double delta_max = 0.6;
  double da_max = 2.5;      // per step
  double ddelta_max = 0.3;  // per step

  void validate() const;
  /// Tightest turn radius L / tan(delta_max).
  double min_turn_radius() const;
};

using StateMatrix = Eigen::Matrix4d;
using InputMatrix = Eigen::Matrix<double, 4, 2>;

/// Affine model s' = A s + B u + c, exact at the nominal point.
struct Linearization {
  StateMatrix A = StateMatrix::Identity();
  InputMatrix B = InputMatrix::Zero();
  Eigen::Vector4d c = Eigen::Vector4d::Zero();

  Eigen::Vector4d apply(const Eigen::Vector4d& s, const Eigen::Vector2d& u) const {
    return A * s + B * u + c;
  }
};

/// Forward-Euler step of x' = v cos psi, y' = v sin psi, psi' = v tan(delta) / L, v' = a.
VehicleState step(const VehicleState& s, const VehicleInput& u, const VehicleParams& p);

Linearization linearize(const VehicleState& s, const VehicleInput& u, const VehicleParams& p);

}  // namespace syncdmpc
