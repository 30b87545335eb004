#include "bnav/sim/sensor.hpp"

#include <limits>

#include "bnav/common.hpp"

namespace bnav::sim {

double raycast(const World& world, double x, double y, double angle,
               double max_range, int* hit_cx, int* hit_cy) {
  if (hit_cx) *hit_cx = -1;
  if (hit_cy) *hit_cy = -1;
  double dx = std::cos(angle), dy = std::sin(angle);
  int cx = World::cell_of(x);
  int cy = World::cell_of(y);

  constexpr double kInf = std::numeric_limits<double>::infinity();
  int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  double t_delta_x = step_x ? kCellSize / std::abs(dx) : kInf;
  double t_delta_y = step_y ? kCellSize / std::abs(dy) : kInf;
  double next_bx = (cx + (step_x > 0 ? 1 : 0)) * kCellSize;
  double next_by = (cy + (step_y > 0 ? 1 : 0)) * kCellSize;
  double t_max_x = step_x ? (next_bx - x) / dx : kInf;
  double t_max_y = step_y ? (next_by - y) / dy : kInf;

  double t = 0.0;
  while (t <= max_range) {
    if (world.occupied(cx, cy)) {
      if (hit_cx) *hit_cx = cx;
      if (hit_cy) *hit_cy = cy;
      return std::min(t, max_range);
    }
    if (t_max_x < t_max_y) {
      t = t_max_x;
      t_max_x += t_delta_x;
      cx += step_x;
    } else {
      t = t_max_y;
      t_max_y += t_delta_y;
      cy += step_y;
    }
    if (!world.in_bounds(cx, cy)) break;  // boundary is occupied anyway
  }
  return max_range;
}

Observation render(const World& world, const Pose& pose) {
  if (world.occupied_at(pose.x, pose.y))
    throw RenderError("render pose inside an occupied cell");
  Observation obs;
  for (int i = 0; i < kNumRays; ++i) {
    int hx = -1, hy = -1;
    double d = raycast(world, pose.x, pose.y,
                       pose.theta + ray_bearing(i), kMaxRange, &hx, &hy);
    obs.depth[i] = static_cast<float>(d);
    obs.appearance[i] =
        (d < kMaxRange && hx >= 0)
            ? static_cast<float>(world.appearance(hx, hy))
            : 0.0f;
  }
  return obs;
}

}  // namespace bnav::sim
