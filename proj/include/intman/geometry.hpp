#pragma once

#include <optional>
#include <vector>

namespace intman {

/// Travel direction of a straight lane through the intersection.
enum class Direction { North = 0, East = 1, South = 2, West = 3 };

/// Lanes 0..M-1 are assigned round-robin to N, E, S, W.
Direction lane_direction(int lane);

enum class SpeedPattern {
  Uniform,        ///< 1.5 m/s on every lane
  Heterogeneous,  ///< 1.5 m/s on lanes 1,4,5,8 and 1.0 m/s on 2,3,6,7 (1-based)
};

/// Region of interest: per-lane approach lengths, intersection traversal
/// lengths, speed limits and the lane-level conflict relation.
///
/// Positions along a lane run from -approach_length at RoI entry to 0 at
/// intersection entry. Conflict values: 0 same lane, 1 disjoint lanes,
/// -1 lanes that cross inside the intersection.
struct LaneGeometry {
  int num_lanes = 0;
  std::vector<double> approach_length;
  std::vector<double> intersection_span;
  std::vector<double> lane_speed_limit;
  std::vector<int> conflict;  // row-major num_lanes x num_lanes

  int conflict_at(int lane_a, int lane_b) const {
    return conflict[static_cast<std::size_t>(lane_a * num_lanes + lane_b)];
  }
  bool lane_valid(int lane) const { return lane >= 0 && lane < num_lanes; }
  double max_approach() const;

  /// Throws InputError when an invariant is broken.
  void validate() const;
};

/// Builds a geometry with constant per-lane values. Without an explicit
/// conflict table, lanes conflict iff their round-robin directions are
/// perpendicular.
LaneGeometry make_geometry(int num_lanes, std::vector<double> approach_length,
                           std::vector<double> intersection_span,
                           std::vector<double> speed_limit,
                           std::optional<std::vector<int>> conflict = std::nullopt);

/// 8 lanes from 4 directions, 7 m approaches, 2.8 m square intersection.
LaneGeometry default_warehouse_geometry(SpeedPattern pattern = SpeedPattern::Uniform);

std::vector<double> speed_limits(SpeedPattern pattern, int num_lanes);

int conflict_value(const LaneGeometry& geom, int lane_a, int lane_b);

}  // namespace intman
