#include "syncdmpc/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace syncdmpc {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

// Maps to [0, 2pi); values within rounding of 2pi collapse to 0 so aligned
// poses do not produce spurious full turns.
double mod2pi(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r > kTwoPi - 1e-10) r = 0.0;
  return r;
}

std::array<SegmentType, 3> word_types(DubinsWord w) {
  using S = SegmentType;
  switch (w) {
    case DubinsWord::LSL: return {S::Left, S::Straight, S::Left};
    case DubinsWord::RSR: return {S::Right, S::Straight, S::Right};
    case DubinsWord::LSR: return {S::Left, S::Straight, S::Right};
    case DubinsWord::RSL: return {S::Right, S::Straight, S::Left};
    case DubinsWord::RLR: return {S::Right, S::Left, S::Right};
    case DubinsWord::LRL: return {S::Left, S::Right, S::Left};
  }
  return {S::Straight, S::Straight, S::Straight};
}

Pose advance(const Pose& p, double curvature, double s) {
  if (curvature == 0.0) {
    return {p.x + s * std::cos(p.psi), p.y + s * std::sin(p.psi), p.psi};
  }
  const double psi = p.psi + curvature * s;
  return {p.x + (std::sin(psi) - std::sin(p.psi)) / curvature,
          p.y - (std::cos(psi) - std::cos(p.psi)) / curvature, psi};
}

double point_segment_distance(double px, double py, const Pose& a, const Pose& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (a.x + t * dx), py - (a.y + t * dy));
}

}  // namespace

std::string to_string(DubinsWord w) {
  switch (w) {
    case DubinsWord::LSL: return "LSL";
    case DubinsWord::RSR: return "RSR";
    case DubinsWord::LSR: return "LSR";
    case DubinsWord::RSL: return "RSL";
    case DubinsWord::RLR: return "RLR";
    case DubinsWord::LRL: return "LRL";
  }
  return "?";
}

DubinsPath::DubinsPath(Pose start, double radius, DubinsWord word, std::array<double, 3> lengths)
    : start_(start), radius_(radius), word_(word) {
  const auto types = word_types(word);
  Pose cursor = start;
  for (std::size_t i = 0; i < 3; ++i) {
    if (lengths[i] <= 0.0) continue;
    PathSegment seg;
    seg.type = types[i];
    seg.length = lengths[i];
    seg.curvature = types[i] == SegmentType::Left    ? 1.0 / radius
                    : types[i] == SegmentType::Right ? -1.0 / radius
                                                     : 0.0;
    seg.start = cursor;
    cursor = advance(cursor, seg.curvature, seg.length);
    length_ += seg.length;
    segments_.push_back(seg);
  }
}

Pose DubinsPath::at(double s) const {
  s = std::clamp(s, 0.0, length_);
  for (const auto& seg : segments_) {
    if (s <= seg.length) return advance(seg.start, seg.curvature, s);
    s -= seg.length;
  }
  if (segments_.empty()) return start_;
  const auto& last = segments_.back();
  return advance(last.start, last.curvature, last.length);
}

double DubinsPath::curvature_at(double s) const {
  for (const auto& seg : segments_) {
    if (s < seg.length) return seg.curvature;
    s -= seg.length;
  }
  return segments_.empty() ? 0.0 : segments_.back().curvature;
}

double DubinsPath::distance_to(double x, double y) const {
  if (segments_.empty()) return std::hypot(x - start_.x, y - start_.y);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& seg : segments_) {
    const Pose end = advance(seg.start, seg.curvature, seg.length);
    if (seg.curvature == 0.0) {
      best = std::min(best, point_segment_distance(x, y, seg.start, end));
      continue;
    }
    const double r = 1.0 / std::abs(seg.curvature);
    const double cx = seg.start.x - std::sin(seg.start.psi) / seg.curvature;
    const double cy = seg.start.y + std::cos(seg.start.psi) / seg.curvature;
    const double phi0 = std::atan2(seg.start.y - cy, seg.start.x - cx);
    const double phi = std::atan2(y - cy, x - cx);
    const double sweep = seg.length / r;
    const double offset = seg.curvature > 0.0 ? mod2pi(phi - phi0) : mod2pi(phi0 - phi);
    if (offset <= sweep) {
      best = std::min(best, std::abs(std::hypot(x - cx, y - cy) - r));
    } else {
      best = std::min({best, std::hypot(x - seg.start.x, y - seg.start.y),
                       std::hypot(x - end.x, y - end.y)});
    }
  }
  return best;
}

std::optional<DubinsPath> dubins_word_path(const Pose& start, const Pose& goal, double radius,
                                           DubinsWord word) {
  if (!(radius > 0.0)) throw Error("dubins: radius must be positive");
  const double dx = goal.x - start.x;
  const double dy = goal.y - start.y;
  const double dist = std::hypot(dx, dy);
  const double d = dist / radius;
  const double theta = dist > 0.0 ? mod2pi(std::atan2(dy, dx)) : 0.0;
  const double alpha = mod2pi(start.psi - theta);
  const double beta = mod2pi(goal.psi - theta);

  if (dist < 1e-12 && mod2pi(goal.psi - start.psi) == 0.0) {
    return DubinsPath(start, radius, word, {0.0, 0.0, 0.0});
  }

  const double sa = std::sin(alpha);
  const double sb = std::sin(beta);
  const double ca = std::cos(alpha);
  const double cb = std::cos(beta);
  const double cab = std::cos(alpha - beta);

  double t = 0.0;
  double p = 0.0;
  double q = 0.0;
  switch (word) {
    case DubinsWord::LSL: {
      const double p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb);
      if (p2 < 0.0) return std::nullopt;
      const double tmp = std::atan2(cb - ca, d + sa - sb);
      t = mod2pi(tmp - alpha);
      p = std::sqrt(p2);
      q = mod2pi(beta - tmp);
      break;
    }
    case DubinsWord::RSR: {
      const double p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa);
      if (p2 < 0.0) return std::nullopt;
      const double tmp = std::atan2(ca - cb, d - sa + sb);
      t = mod2pi(alpha - tmp);
      p = std::sqrt(p2);
      q = mod2pi(tmp - beta);
      break;
    }
    case DubinsWord::LSR: {
      const double p2 = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb);
      if (p2 < 0.0) return std::nullopt;
      p = std::sqrt(p2);
      const double tmp = std::atan2(-ca - cb, d + sa + sb) - std::atan2(-2.0, p);
      t = mod2pi(tmp - alpha);
      q = mod2pi(tmp - beta);
      break;
    }
    case DubinsWord::RSL: {
      const double p2 = -2.0 + d * d + 2.0 * cab - 2.0 * d * (sa + sb);
      if (p2 < 0.0) return std::nullopt;
      p = std::sqrt(p2);
      const double tmp = std::atan2(ca + cb, d - sa - sb) - std::atan2(2.0, p);
      t = mod2pi(alpha - tmp);
      q = mod2pi(beta - tmp);
      break;
    }
    case DubinsWord::RLR: {
      const double c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0;
      if (std::abs(c) > 1.0) return std::nullopt;
      const double phi = std::atan2(ca - cb, d - sa + sb);
      p = mod2pi(kTwoPi - std::acos(c));
      t = mod2pi(alpha - phi + p / 2.0);
      q = mod2pi(alpha - beta - t + p);
      break;
    }
    case DubinsWord::LRL: {
      const double c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0;
      if (std::abs(c) > 1.0) return std::nullopt;
      const double phi = std::atan2(ca - cb, d + sa - sb);
      p = mod2pi(kTwoPi - std::acos(c));
      t = mod2pi(-alpha - phi + p / 2.0);
      q = mod2pi(beta - alpha - t + p);
      break;
    }
  }
  return DubinsPath(start, radius, word, {t * radius, p * radius, q * radius});
}

DubinsPath dubins_shortest_path(const Pose& start, const Pose& goal, double radius) {
  std::optional<DubinsPath> best;
  for (DubinsWord w : kAllDubinsWords) {
    auto candidate = dubins_word_path(start, goal, radius, w);
    if (candidate && (!best || candidate->length() < best->length())) best = std::move(candidate);
  }
  if (!best) throw Error("dubins: no admissible word");
  return *best;
}

VehicleState ReferenceTrajectory::state(int k) const {
  if (states.empty()) throw Error("reference trajectory is empty");
  return states[static_cast<std::size_t>(std::clamp(k, 0, size() - 1))];
}

VehicleInput ReferenceTrajectory::input(int k) const {
  if (k >= size() - 1 || k < 0) return {};
  return inputs[static_cast<std::size_t>(k)];
}

std::vector<VehicleState> ReferenceTrajectory::window(int t, int horizon) const {
  std::vector<VehicleState> out;
  out.reserve(static_cast<std::size_t>(horizon));
  for (int k = 1; k <= horizon; ++k) out.push_back(state(t + k));
  return out;
}

std::vector<VehicleInput> ReferenceTrajectory::input_window(int t, int horizon) const {
  std::vector<VehicleInput> out;
  out.reserve(static_cast<std::size_t>(horizon));
  for (int k = 0; k < horizon; ++k) out.push_back(input(t + k));
  return out;
}

ReferenceTrajectory sample_trajectory(const DubinsPath& path, const VehicleParams& params,
                                      const SpeedProfile& profile, int min_samples) {
  params.validate();
  if (!(profile.cruise_speed > 0.0) || !(profile.acceleration > 0.0) ||
      !(profile.deceleration > 0.0)) {
    throw Error("speed profile: cruise speed and ramps must be positive");
  }
  const double total = path.length();
  const double acc = profile.acceleration;
  const double dec = profile.deceleration;
  double vc = std::min(profile.cruise_speed, params.v_max);
  double t_acc = vc / acc;
  double t_dec = vc / dec;
  double t_cruise = 0.0;
  const double ramp_dist = vc * vc / (2.0 * acc) + vc * vc / (2.0 * dec);
  if (ramp_dist <= total) {
    t_cruise = (total - ramp_dist) / vc;
  } else {
    vc = std::sqrt(2.0 * total * acc * dec / (acc + dec));
    t_acc = vc / acc;
    t_dec = vc / dec;
  }
  const double duration = t_acc + t_cruise + t_dec;
  const double s_acc = 0.5 * acc * t_acc * t_acc;

  auto profile_at = [&](double t) -> std::pair<double, double> {
    if (total <= 0.0 || t >= duration) return {total, 0.0};
    if (t < t_acc) return {0.5 * acc * t * t, acc * t};
    if (t < t_acc + t_cruise) return {s_acc + vc * (t - t_acc), vc};
    const double tau = t - t_acc - t_cruise;
    return {std::min(total, s_acc + vc * t_cruise + vc * tau - 0.5 * dec * tau * tau),
            std::max(0.0, vc - dec * tau)};
  };

  ReferenceTrajectory ref;
  ref.dt = params.dt;
  const int last = total > 0.0 ? static_cast<int>(std::ceil(duration / params.dt - 1e-12)) : 0;
  const int count = std::max(last + 1, min_samples);
  for (int k = 0; k < count; ++k) {
    const auto [s, v] = profile_at(k * params.dt);
    const Pose pose = path.at(s);
    ref.states.push_back({pose.x, pose.y, pose.psi, v});
    ref.arc_length.push_back(s);
  }
  for (int k = 0; k < count; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    VehicleInput u;
    if (k + 1 < count) {
      u.a = (ref.states[ks + 1].v - ref.states[ks].v) / params.dt;
      if (ref.states[ks].v > 0.0 || ref.states[ks + 1].v > 0.0) {
        u.delta = std::clamp(std::atan(params.wheelbase * path.curvature_at(ref.arc_length[ks])),
                             -params.delta_max, params.delta_max);
      }
    }
    ref.inputs.push_back(u);
  }
  return ref;
}

}  // namespace syncdmpc
