#pragma once

#include <vector>

#include "bnav/geometry.hpp"
#include "bnav/sim/world.hpp"

namespace bnav::expert {

struct PlanParams {
  double inflation = sim::kRobotRadius + 0.02;  // clearance radius, meters
  double snap_radius = 0.6;    // how far start/goal may sit inside inflation
  double los_step = 0.02;      // sampling step for string pulling, meters
};

struct PlanResult {
  std::vector<Vec2> waypoints;  // string-pulled, first = start, last = goal
  double grid_length = 0.0;     // raw 8-connected path length, meters
  double length = 0.0;          // pulled polyline length, meters
};

// blocked mask used by the planner: occupied cells dilated by the inflation
// radius (cell centers within `inflation` of any occupied cell rectangle)
std::vector<uint8_t> inflate_grid(const sim::World& world, double inflation);

// A* over the inflated 8-connected grid followed by greedy string pulling.
// Throws NoPathError when start/goal cannot be snapped or no route exists.
PlanResult plan_path(const sim::World& world, const Vec2& start, const Vec2& goal,
                     const PlanParams& params = {});

// arc-length point lookup on a polyline (clamped to the ends)
Vec2 point_at_arc(const std::vector<Vec2>& pts, double s);
double polyline_length(const std::vector<Vec2>& pts);

}  // namespace bnav::expert
