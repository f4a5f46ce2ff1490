#include "syncdmpc/vehicle_model.hpp"

#include <cmath>

namespace syncdmpc {

void VehicleParams::validate() const {
  if (!(wheelbase > 0.0)) throw Error("vehicle params: wheelbase must be positive");
  if (!(dt > 0.0)) throw Error("vehicle params: dt must be positive");
  if (!(v_min <= v_max)) throw Error("vehicle params: v_min > v_max");
  if (!(a_min <= a_max)) throw Error("vehicle params: a_min > a_max");
  if (!(delta_max > 0.0) || !(delta_max < M_PI / 2)) {
    throw Error("vehicle params: delta_max must lie in (0, pi/2)");
  }
  if (!(da_max > 0.0) || !(ddelta_max > 0.0)) {
    throw Error("vehicle params: input variation bounds must be positive");
  }
  if (!(length > 0.0)) throw Error("vehicle params: length must be positive");
}

double VehicleParams::min_turn_radius() const { return wheelbase / std::tan(delta_max); }

namespace {

void require_finite(const VehicleState& s, const VehicleInput& u) {
  if (!s.vec().allFinite() || !u.vec().allFinite()) {
    throw Error("vehicle model: non-finite state or input");
  }
}

}  // namespace

VehicleState step(const VehicleState& s, const VehicleInput& u, const VehicleParams& p) {
  require_finite(s, u);
  return {s.x + p.dt * s.v * std::cos(s.psi), s.y + p.dt * s.v * std::sin(s.psi),
          s.psi + p.dt * s.v * std::tan(u.delta) / p.wheelbase, s.v + p.dt * u.a};
}

Linearization linearize(const VehicleState& s, const VehicleInput& u, const VehicleParams& p) {
  require_finite(s, u);
  const double c = std::cos(s.psi);
  const double sn = std::sin(s.psi);
  const double t = std::tan(u.delta);
  const double sec2 = 1.0 + t * t;

  Linearization lin;
  lin.A(0, 2) = -p.dt * s.v * sn;
  lin.A(0, 3) = p.dt * c;
  lin.A(1, 2) = p.dt * s.v * c;
  lin.A(1, 3) = p.dt * sn;
  lin.A(2, 3) = p.dt * t / p.wheelbase;
  lin.B(2, 1) = p.dt * s.v * sec2 / p.wheelbase;
  lin.B(3, 0) = p.dt;
  lin.c = step(s, u, p).vec() - lin.A * s.vec() - lin.B * u.vec();
  return lin;
}

}  // namespace syncdmpc
