#include "intman/geometry.hpp"

#include <algorithm>
#include <string>

#include "intman/errors.hpp"

namespace intman {

Direction lane_direction(int lane) { return static_cast<Direction>(lane % 4); }

double LaneGeometry::max_approach() const {
  return approach_length.empty()
             ? 0.0
             : *std::max_element(approach_length.begin(), approach_length.end());
}

void LaneGeometry::validate() const {
  if (num_lanes <= 0) throw InputError("geometry: num_lanes must be positive");
  const auto m = static_cast<std::size_t>(num_lanes);
  if (approach_length.size() != m || intersection_span.size() != m ||
      lane_speed_limit.size() != m)
    throw InputError("geometry: per-lane arrays must have num_lanes entries");
  if (conflict.size() != m * m)
    throw InputError("geometry: conflict table must be num_lanes x num_lanes");
  for (std::size_t l = 0; l < m; ++l) {
    if (!(approach_length[l] > 0) || !(intersection_span[l] > 0) ||
        !(lane_speed_limit[l] > 0))
      throw InputError("geometry: lane " + std::to_string(l) +
                       " has a non-positive length or speed limit");
  }
  for (int a = 0; a < num_lanes; ++a) {
    if (conflict_at(a, a) != 0)
      throw InputError("geometry: conflict diagonal must be 0");
    for (int b = 0; b < num_lanes; ++b) {
      if (a == b) continue;
      const int c = conflict_at(a, b);
      if (c != 1 && c != -1)
        throw InputError("geometry: off-diagonal conflict entries must be 1 or -1");
      if (c != conflict_at(b, a))
        throw InputError("geometry: conflict table must be symmetric");
    }
  }
}

LaneGeometry make_geometry(int num_lanes, std::vector<double> approach_length,
                           std::vector<double> intersection_span,
                           std::vector<double> speed_limit,
                           std::optional<std::vector<int>> conflict) {
  if (num_lanes <= 0) throw InputError("geometry: num_lanes must be positive");
  const auto m = static_cast<std::size_t>(num_lanes);
  auto broadcast = [m](std::vector<double>& values, const char* name) {
    if (values.size() == 1) values.assign(m, values.front());
    if (values.size() != m)
      throw InputError(std::string("geometry: ") + name +
                       " needs 1 or num_lanes values");
  };
  broadcast(approach_length, "approach_length");
  broadcast(intersection_span, "intersection_span");
  broadcast(speed_limit, "speed_limit");

  LaneGeometry geom;
  geom.num_lanes = num_lanes;
  geom.approach_length = std::move(approach_length);
  geom.intersection_span = std::move(intersection_span);
  geom.lane_speed_limit = std::move(speed_limit);
  if (conflict) {
    geom.conflict = std::move(*conflict);
  } else {
    geom.conflict.assign(m * m, 0);
    for (int a = 0; a < num_lanes; ++a) {
      for (int b = 0; b < num_lanes; ++b) {
        if (a == b) continue;
        const int da = static_cast<int>(lane_direction(a));
        const int db = static_cast<int>(lane_direction(b));
        const bool perpendicular = (da + db) % 2 == 1;
        geom.conflict[static_cast<std::size_t>(a * num_lanes + b)] = perpendicular ? -1 : 1;
      }
    }
  }
  geom.validate();
  return geom;
}

std::vector<double> speed_limits(SpeedPattern pattern, int num_lanes) {
  std::vector<double> limits(static_cast<std::size_t>(num_lanes), 1.5);
  if (pattern == SpeedPattern::Heterogeneous) {
    // 1-based lanes 2,3,6,7 are the slow ones; the pattern repeats every 4.
    for (int l = 0; l < num_lanes; ++l) {
      const int r = l % 4;
      if (r == 1 || r == 2) limits[static_cast<std::size_t>(l)] = 1.0;
    }
  }
  return limits;
}

LaneGeometry default_warehouse_geometry(SpeedPattern pattern) {
  constexpr int kLanes = 8;
  constexpr double kLaneWidth = 0.7;
  return make_geometry(kLanes, {7.0}, {4 * kLaneWidth}, speed_limits(pattern, kLanes));
}

int conflict_value(const LaneGeometry& geom, int lane_a, int lane_b) {
  if (!geom.lane_valid(lane_a) || !geom.lane_valid(lane_b))
    throw InputError("conflict_value: lane id out of range");
  return geom.conflict_at(lane_a, lane_b);
}

}  // namespace intman
