#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "syncdmpc/vehicle_model.hpp"

namespace syncdmpc {

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
};

enum class SegmentType { Left, Straight, Right };
enum class DubinsWord { LSL, RSR, LSR, RSL, RLR, LRL };

inline constexpr std::array<DubinsWord, 6> kAllDubinsWords{
    DubinsWord::LSL, DubinsWord::RSR, DubinsWord::LSR,
    DubinsWord::RSL, DubinsWord::RLR, DubinsWord::LRL};

std::string to_string(DubinsWord w);

struct PathSegment {
  SegmentType type = SegmentType::Straight;
  double length = 0.0;     // [m]
  double curvature = 0.0;  // signed, +1/r for left turns
  Pose start;              // heading unwrapped
};

/// Curvature-bounded planar path assembled from arcs and straights.
class DubinsPath {
 public:
  DubinsPath() = default;
  DubinsPath(Pose start, double radius, DubinsWord word, std::array<double, 3> lengths);

  const Pose& start() const { return start_; }
  double radius() const { return radius_; }
  DubinsWord word() const { return word_; }
  const std::vector<PathSegment>& segments() const { return segments_; }
  double length() const { return length_; }

  /// Pose at arc length s (clamped to [0, length]); heading unwrapped.
  Pose at(double s) const;
  double curvature_at(double s) const;
  Pose end() const { return at(length_); }
  /// Euclidean distance from (x, y) to the nearest point of the path.
  double distance_to(double x, double y) const;

 private:
  Pose start_;
  double radius_ = 1.0;
  DubinsWord word_ = DubinsWord::LSL;
  std::vector<PathSegment> segments_;
  double length_ = 0.0;
};

/// The path for one word, or nullopt when the word admits no solution.
std::optional<DubinsPath> dubins_word_path(const Pose& start, const Pose& goal, double radius,
                                           DubinsWord word);

/// Minimum-length path among all six words.
DubinsPath dubins_shortest_path(const Pose& start, const Pose& goal, double radius);

/// Trapezoidal speed profile: ramp at `acceleration`, cruise, ramp down at
/// `deceleration` to rest at the path end.
struct SpeedProfile {
  double cruise_speed = 0.8;
  double acceleration = 1.0;
  double deceleration = 1.0;
};

/// Time-indexed reference. Sample k is the state at t = k dt; the final entry
/// is the goal at rest and queries past the end repeat it.
struct ReferenceTrajectory {
  double dt = 0.2;
  std::vector<VehicleState> states;
  std::vector<VehicleInput> inputs;  // nominal inputs, same length as states
  std::vector<double> arc_length;    // path coordinate of each sample

  VehicleState state(int k) const;
  VehicleInput input(int k) const;
  /// States k = t+1 .. t+horizon.
  std::vector<VehicleState> window(int t, int horizon) const;
  /// Nominal inputs k = t .. t+horizon-1.
  std::vector<VehicleInput> input_window(int t, int horizon) const;
  int size() const { return static_cast<int>(states.size()); }
};

ReferenceTrajectory sample_trajectory(const DubinsPath& path, const VehicleParams& params,
                                      const SpeedProfile& profile, int min_samples = 1);

}  // namespace syncdmpc
