#pragma once

#include <array>
#include <cmath>

#include "bnav/geometry.hpp"
#include "bnav/sim/world.hpp"

namespace bnav::sim {

constexpr int kNumRays = 64;
constexpr double kFov = 2.0 * M_PI / 3.0;  // 120 degrees
constexpr double kMaxRange = 5.0;          // meters

// Depth + appearance panorama. Ray 0 points at theta - FOV/2 (rightmost),
// ray 63 at theta + FOV/2; misses read max range with appearance 0.
struct Observation {
  std::array<float, kNumRays> depth{};
  std::array<float, kNumRays> appearance{};

  bool operator==(const Observation&) const = default;
};

// ray angle offset from the heading, in radians
inline double ray_bearing(int i) {
  return -kFov / 2.0 + kFov * static_cast<double>(i) / (kNumRays - 1);
}

// Single ray march (grid DDA). Returns distance to the first occupied cell
// boundary, capped at max_range; hit_cx/hit_cy receive the hit cell or -1.
double raycast(const World& world, double x, double y, double angle,
               double max_range, int* hit_cx = nullptr, int* hit_cy = nullptr);

// Throws RenderError if the pose sits inside an occupied cell.
Observation render(const World& world, const Pose& pose);

}  // namespace bnav::sim
