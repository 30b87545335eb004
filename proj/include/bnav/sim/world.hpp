#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bnav/common.hpp"
#include "bnav/geometry.hpp"
#include "bnav/rng.hpp"

namespace bnav::sim {

constexpr double kCellSize = 0.1;       // meters
constexpr double kRobotRadius = 0.15;   // meters

struct WorldSpec {
  double width_m = 10.0;
  double height_m = 10.0;
  int rooms = 5;
  double corridor_width_m = 1.1;
  double room_min_m = 2.0;
  double room_max_m = 3.6;
  int extra_links = 1;   // corridors beyond the spanning tree
  int max_attempts = 40;
};

// Occupancy grid with a procedural per-cell appearance texture. Cell (cx,cy)
// covers [cx*cell, (cx+1)*cell) x [cy*cell, (cy+1)*cell) meters.
class World {
 public:
  World() = default;
  World(int w, int h, uint64_t seed, uint64_t texture_seed);

  static World generate(uint64_t seed, const WorldSpec& spec);
  static World from_ascii(const std::string& art, uint64_t texture_seed);

  void save(const std::string& path) const;
  static World load(const std::string& path);

  int width_cells() const { return w_; }
  int height_cells() const { return h_; }
  double width_m() const { return w_ * kCellSize; }
  double height_m() const { return h_ * kCellSize; }
  uint64_t seed() const { return seed_; }
  uint64_t texture_seed() const { return texture_seed_; }

  bool in_bounds(int cx, int cy) const {
    return cx >= 0 && cy >= 0 && cx < w_ && cy < h_;
  }
  // out-of-bounds reads as occupied
  bool occupied(int cx, int cy) const {
    if (!in_bounds(cx, cy)) return true;
    return occ_[static_cast<size_t>(cy) * w_ + cx] != 0;
  }
  void set_occupied(int cx, int cy, bool v) {
    if (in_bounds(cx, cy)) occ_[static_cast<size_t>(cy) * w_ + cx] = v ? 1 : 0;
  }
  bool occupied_at(double x, double y) const {
    return occupied(cell_of(x), cell_of(y));
  }
  static int cell_of(double v) { return static_cast<int>(std::floor(v / kCellSize)); }

  // multi-scale hash texture in [0,1]; pure function of (texture_seed, cell)
  double appearance(int cx, int cy) const;

  const std::vector<uint8_t>& grid() const { return occ_; }
  bool operator==(const World& o) const {
    return w_ == o.w_ && h_ == o.h_ && seed_ == o.seed_ &&
           texture_seed_ == o.texture_seed_ && occ_ == o.occ_;
  }

  // true iff all free cells form a single 4-connected component
  bool connected_free_space() const;
  size_t free_cell_count() const;

 private:
  int w_ = 0;
  int h_ = 0;
  uint64_t seed_ = 0;
  uint64_t texture_seed_ = 0;
  std::vector<uint8_t> occ_;
};

// true iff any occupied cell intersects the disk at (pose.x, pose.y)
bool collision_check(const World& world, const Pose& pose, double radius);

// Mapping-style world: corridor skeleton with dead-end site rooms. Each
// site gets a departure pose (heading out the door) and an arrival pose
// (heading in), both at the room center.
struct Site {
  Pose departure;
  Pose arrival;
};

struct SiteWorldSpec {
  double width_m = 16.0;
  double height_m = 16.0;
  int junction_grid = 3;
  int sites = 8;
  double corridor_width_m = 1.1;
  double site_room_m = 2.0;
  double stub_min_m = 1.0;
  double stub_max_m = 2.2;
  int max_attempts = 60;
};

struct SiteWorld {
  World world;
  std::vector<Site> sites;
};

SiteWorld generate_site_world(uint64_t seed, const SiteWorldSpec& spec);

}  // namespace bnav::sim
