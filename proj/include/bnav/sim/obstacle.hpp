#pragma once

#include <vector>

#include "bnav/geometry.hpp"
#include "bnav/rng.hpp"
#include "bnav/sim/world.hpp"

namespace bnav::sim {

constexpr double kObstacleSide = 0.3;  // axis-aligned square, meters

// Drops a square obstacle next to (offset > 0) or on (offset == 0) a point
// chosen uniformly along the reference path. The side of the path is chosen
// at random. Cells overlapping the square become occupied. Throws
// PlacementError if the block would cover the path start or goal cell, or
// if no in-bounds cell changes.
World place_obstacle(const World& world, const std::vector<Pose>& path,
                     double offset, Rng& rng);

}  // namespace bnav::sim
