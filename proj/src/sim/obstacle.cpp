#include "bnav/sim/obstacle.hpp"

#include <cmath>

#include "bnav/common.hpp"

namespace bnav::sim {

World place_obstacle(const World& world, const std::vector<Pose>& path,
                     double offset, Rng& rng) {
  if (path.size() < 2) throw PlacementError("path too short for obstacle placement");
  size_t idx = 1 + rng.uniform_int(path.size() - 2);  // skip endpoints
  const Pose& at = path[idx];
  // local travel direction from the neighboring samples
  Vec2 dir = path[idx + 1].position() - path[idx - 1].position();
  double n = dir.norm();
  if (n < 1e-9) dir = {std::cos(at.theta), std::sin(at.theta)};
  else dir = dir * (1.0 / n);
  Vec2 lateral{-dir.y, dir.x};
  double side = (rng.uniform() < 0.5) ? 1.0 : -1.0;
  Vec2 center = at.position() + lateral * (offset * side);

  double half = kObstacleSide / 2.0;
  int cx0 = World::cell_of(center.x - half);
  int cx1 = World::cell_of(center.x + half);
  int cy0 = World::cell_of(center.y - half);
  int cy1 = World::cell_of(center.y + half);

  int start_cx = World::cell_of(path.front().x);
  int start_cy = World::cell_of(path.front().y);
  int goal_cx = World::cell_of(path.back().x);
  int goal_cy = World::cell_of(path.back().y);

  World out = world;
  int changed = 0;
  for (int cy = cy0; cy <= cy1; ++cy) {
    for (int cx = cx0; cx <= cx1; ++cx) {
      if (!out.in_bounds(cx, cy)) continue;
      if ((cx == start_cx && cy == start_cy) || (cx == goal_cx && cy == goal_cy))
        throw PlacementError("obstacle would cover the path start or goal");
      if (!out.occupied(cx, cy)) {
        out.set_occupied(cx, cy, true);
        ++changed;
      }
    }
  }
  if (changed == 0) throw PlacementError("obstacle placement changed no cells");
  return out;
}

}  // namespace bnav::sim
