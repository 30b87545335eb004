#include "bnav/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <sstream>

#include "bnav/binio.hpp"

namespace bnav::sim {

World::World(int w, int h, uint64_t seed, uint64_t texture_seed)
    : w_(w), h_(h), seed_(seed), texture_seed_(texture_seed),
      occ_(static_cast<size_t>(w) * h, 1) {
  if (w < 4 || h < 4) throw WorldGenError("world dimensions too small");
}

double World::appearance(int cx, int cy) const {
  // coarse 8-cell blocks give wall-scale patches, fine layer adds per-cell detail
  auto h01 = [](uint64_t v) {
    uint64_t s = v;
    return static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
  };
  uint64_t fine = mix64(texture_seed_,
                        mix64(static_cast<uint64_t>(cx) + 0x9e37,
                              static_cast<uint64_t>(cy) + 0x79b9));
  uint64_t coarse = mix64(texture_seed_ ^ 0x5bf0a8dcull,
                          mix64(static_cast<uint64_t>(cx >> 3),
                                static_cast<uint64_t>(cy >> 3)));
  return 0.35 * h01(fine) + 0.65 * h01(coarse);
}

bool World::connected_free_space() const {
  size_t total = free_cell_count();
  if (total == 0) return false;
  int sx = -1, sy = -1;
  for (int y = 0; y < h_ && sx < 0; ++y)
    for (int x = 0; x < w_; ++x)
      if (!occupied(x, y)) { sx = x; sy = y; break; }
  std::vector<uint8_t> seen(occ_.size(), 0);
  std::deque<std::pair<int, int>> q{{sx, sy}};
  seen[static_cast<size_t>(sy) * w_ + sx] = 1;
  size_t count = 0;
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop_front();
    ++count;
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      int nx = x + dx[k], ny = y + dy[k];
      if (occupied(nx, ny)) continue;
      size_t idx = static_cast<size_t>(ny) * w_ + nx;
      if (seen[idx]) continue;
      seen[idx] = 1;
      q.emplace_back(nx, ny);
    }
  }
  return count == total;
}

size_t World::free_cell_count() const {
  size_t n = 0;
  for (uint8_t c : occ_)
    if (c == 0) ++n;
  return n;
}

namespace {

struct Rect {
  int x0, y0, x1, y1;  // inclusive cell range
  int cx() const { return (x0 + x1) / 2; }
  int cy() const { return (y0 + y1) / 2; }
};

void carve_rect(World& w, const Rect& r) {
  for (int y = std::max(1, r.y0); y <= std::min(w.height_cells() - 2, r.y1); ++y)
    for (int x = std::max(1, r.x0); x <= std::min(w.width_cells() - 2, r.x1); ++x)
      w.set_occupied(x, y, false);
}

// L-shaped corridor between two cell centers, given half-width in cells
void carve_corridor(World& w, int ax, int ay, int bx, int by, int hw, bool x_first) {
  auto carve_h = [&](int y, int x0, int x1) {
    carve_rect(w, Rect{std::min(x0, x1) - hw, y - hw, std::max(x0, x1) + hw, y + hw});
  };
  auto carve_v = [&](int x, int y0, int y1) {
    carve_rect(w, Rect{x - hw, std::min(y0, y1) - hw, x + hw, std::max(y0, y1) + hw});
  };
  if (x_first) {
    carve_h(ay, ax, bx);
    carve_v(bx, ay, by);
  } else {
    carve_v(ax, ay, by);
    carve_h(by, ax, bx);
  }
}

// Prim's MST over room centers; returns edge list
std::vector<std::pair<int, int>> mst_edges(const std::vector<Rect>& rooms) {
  size_t n = rooms.size();
  std::vector<std::pair<int, int>> edges;
  if (n <= 1) return edges;
  std::vector<uint8_t> in_tree(n, 0);
  in_tree[0] = 1;
  for (size_t added = 1; added < n; ++added) {
    double best = 1e18;
    int bi = -1, bj = -1;
    for (size_t i = 0; i < n; ++i) {
      if (!in_tree[i]) continue;
      for (size_t j = 0; j < n; ++j) {
        if (in_tree[j]) continue;
        double dx = rooms[i].cx() - rooms[j].cx();
        double dy = rooms[i].cy() - rooms[j].cy();
        double d = dx * dx + dy * dy;
        if (d < best) { best = d; bi = static_cast<int>(i); bj = static_cast<int>(j); }
      }
    }
    in_tree[bj] = 1;
    edges.emplace_back(bi, bj);
  }
  return edges;
}

}  // namespace

World World::generate(uint64_t seed, const WorldSpec& spec) {
  int W = static_cast<int>(std::lround(spec.width_m / kCellSize));
  int H = static_cast<int>(std::lround(spec.height_m / kCellSize));
  if (W < 40 || H < 40) throw WorldGenError("world smaller than 4 m per side");
  int hw = std::max(1, static_cast<int>(std::lround(spec.corridor_width_m / kCellSize)) / 2);

  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    Rng rng(mix64(seed, 0xa11ce + attempt));
    World w(W, H, seed, mix64(seed, 0x7e87));
    std::vector<Rect> rooms;
    int wanted = std::max(1, spec.rooms);
    for (int tries = 0; tries < wanted * 30 && static_cast<int>(rooms.size()) < wanted; ++tries) {
      int rw = static_cast<int>(std::lround(
          rng.uniform(spec.room_min_m, std::min(spec.room_max_m, spec.width_m - 1.0)) / kCellSize));
      int rh = static_cast<int>(std::lround(
          rng.uniform(spec.room_min_m, std::min(spec.room_max_m, spec.height_m - 1.0)) / kCellSize));
      rw = std::min(rw, W - 4);
      rh = std::min(rh, H - 4);
      int x0 = 2 + rng.uniform_int(std::max(1, W - 3 - rw));
      int y0 = 2 + rng.uniform_int(std::max(1, H - 3 - rh));
      Rect r{x0, y0, x0 + rw - 1, y0 + rh - 1};
      // keep room centers apart so the layout doesn't collapse into one blob
      bool ok = true;
      for (const Rect& o : rooms) {
        int dx = r.cx() - o.cx(), dy = r.cy() - o.cy();
        if (dx * dx + dy * dy < 15 * 15) { ok = false; break; }
      }
      if (!ok) continue;
      rooms.push_back(r);
    }
    if (rooms.empty()) continue;
    for (const Rect& r : rooms) carve_rect(w, r);

    auto edges = mst_edges(rooms);
    for (int e = 0; e < spec.extra_links && rooms.size() >= 3; ++e) {
      int i = rng.uniform_int(static_cast<int>(rooms.size()));
      int j = rng.uniform_int(static_cast<int>(rooms.size()));
      if (i != j) edges.emplace_back(i, j);
    }
    for (auto [i, j] : edges)
      carve_corridor(w, rooms[i].cx(), rooms[i].cy(), rooms[j].cx(), rooms[j].cy(),
                     hw, rng.uniform() < 0.5);

    if (!w.connected_free_space()) continue;
    if (w.free_cell_count() < static_cast<size_t>(W) * H / 20) continue;
    return w;
  }
  throw WorldGenError("failed to generate a connected world");
}

World World::from_ascii(const std::string& art, uint64_t texture_seed) {
  std::vector<std::string> lines;
  std::stringstream ss(art);
  std::string line;
  while (std::getline(ss, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.size() < 4) throw WorldGenError("ascii world too small");
  size_t W = 0;
  for (const auto& l : lines) W = std::max(W, l.size());
  int h = static_cast<int>(lines.size());
  World w(static_cast<int>(W), h, 0, texture_seed);
  // first text line is the top row of the world
  for (int y = 0; y < h; ++y) {
    const std::string& l = lines[static_cast<size_t>(h - 1 - y)];
    for (size_t x = 0; x < W; ++x) {
      bool occ = x >= l.size() || l[x] == '#';
      w.set_occupied(static_cast<int>(x), y, occ);
    }
  }
  // enforce a closed boundary regardless of the art
  for (int x = 0; x < w.width_cells(); ++x) {
    w.set_occupied(x, 0, true);
    w.set_occupied(x, h - 1, true);
  }
  for (int y = 0; y < h; ++y) {
    w.set_occupied(0, y, true);
    w.set_occupied(w.width_cells() - 1, y, true);
  }
  return w;
}

void World::save(const std::string& path) const {
  BinWriter out(path);
  out.put_string("BNAVWORLD1");
  out.put<int32_t>(w_);
  out.put<int32_t>(h_);
  out.put<uint64_t>(seed_);
  out.put<uint64_t>(texture_seed_);
  out.put_array(occ_.data(), occ_.size());
}

World World::load(const std::string& path) {
  BinReader in(path);
  if (in.get_string() != "BNAVWORLD1") throw IoError("bad world file magic: " + path);
  int w = in.get<int32_t>();
  int h = in.get<int32_t>();
  uint64_t seed = in.get<uint64_t>();
  uint64_t tex = in.get<uint64_t>();
  World out(w, h, seed, tex);
  in.get_array(out.occ_.data(), out.occ_.size());
  return out;
}

bool collision_check(const World& world, const Pose& pose, double radius) {
  int cx0 = World::cell_of(pose.x - radius);
  int cx1 = World::cell_of(pose.x + radius);
  int cy0 = World::cell_of(pose.y - radius);
  int cy1 = World::cell_of(pose.y + radius);
  double r2 = radius * radius;
  for (int cy = cy0; cy <= cy1; ++cy) {
    for (int cx = cx0; cx <= cx1; ++cx) {
      if (!world.occupied(cx, cy)) continue;
      // closest point on the cell rectangle to the disk center
      double px = std::clamp(pose.x, cx * kCellSize, (cx + 1) * kCellSize);
      double py = std::clamp(pose.y, cy * kCellSize, (cy + 1) * kCellSize);
      double dx = px - pose.x, dy = py - pose.y;
      if (dx * dx + dy * dy <= r2) return true;
    }
  }
  return false;
}

namespace {

// clearance of the site-room rectangle plus margin must be solid rock before
// carving, so every site stays a dead end with exactly one entrance
bool region_all_occupied(const World& w, int x0, int y0, int x1, int y1) {
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (!w.occupied(x, y)) return false;
  return true;
}

}  // namespace

SiteWorld generate_site_world(uint64_t seed, const SiteWorldSpec& spec) {
  int W = static_cast<int>(std::lround(spec.width_m / kCellSize));
  int H = static_cast<int>(std::lround(spec.height_m / kCellSize));
  int hw = std::max(1, static_cast<int>(std::lround(spec.corridor_width_m / kCellSize)) / 2);
  int room_half = std::max(3, static_cast<int>(std::lround(spec.site_room_m / kCellSize)) / 2);

  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    Rng rng(mix64(seed, 0x517e + attempt));
    World w(W, H, seed, mix64(seed, 0x7e87));

    // jittered grid of junction nodes joined by L-corridors
    int g = spec.junction_grid;
    std::vector<Rect> nodes;
    for (int gy = 0; gy < g; ++gy) {
      for (int gx = 0; gx < g; ++gx) {
        int x = (gx + 1) * W / (g + 1) + rng.uniform_int(9) - 4;
        int y = (gy + 1) * H / (g + 1) + rng.uniform_int(9) - 4;
        nodes.push_back(Rect{x, y, x, y});
      }
    }
    auto edges = mst_edges(nodes);
    for (int e = 0; e < 2; ++e) {
      int i = rng.uniform_int(static_cast<int>(nodes.size()));
      int j = rng.uniform_int(static_cast<int>(nodes.size()));
      if (i != j) edges.emplace_back(i, j);
    }
    for (auto [i, j] : edges)
      carve_corridor(w, nodes[i].cx(), nodes[i].cy(), nodes[j].cx(), nodes[j].cy(),
                     hw, rng.uniform() < 0.5);

    // Hang dead-end site rooms off the corridor skeleton. A room center is
    // sampled in solid space; the stub runs to the nearest free cell along
    // one of the four axis directions.
    std::vector<Site> sites;
    std::vector<uint8_t> site_mask(static_cast<size_t>(W) * H, 0);
    const int dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    int stub_max_c = static_cast<int>(std::lround(spec.stub_max_m / kCellSize));
    for (int tries = 0; tries < spec.sites * 400 &&
                        static_cast<int>(sites.size()) < spec.sites; ++tries) {
      int rx = room_half + 2 + rng.uniform_int(W - 2 * room_half - 4);
      int ry = room_half + 2 + rng.uniform_int(H - 2 * room_half - 4);
      int x0 = rx - room_half, x1 = rx + room_half;
      int y0 = ry - room_half, y1 = ry + room_half;
      // room plus a 2-cell wall margin must be solid rock
      if (!region_all_occupied(w, x0 - 2, y0 - 2, x1 + 2, y1 + 2)) continue;

      // nearest corridor cell along an axis, shuffled for variety
      int order[4] = {0, 1, 2, 3};
      for (int i = 3; i > 0; --i)
        std::swap(order[i], order[static_cast<int>(rng.uniform_int(i + 1))]);
      int d = -1, k = 0;
      for (int oi = 0; oi < 4 && d < 0; ++oi) {
        int cand = order[oi];
        for (int s = room_half + 3; s <= room_half + stub_max_c; ++s) {
          int sx = rx + dirs[cand][0] * s, sy = ry + dirs[cand][1] * s;
          if (!w.in_bounds(sx, sy)) break;
          if (!w.occupied(sx, sy)) {
            if (!site_mask[static_cast<size_t>(sy) * W + sx]) { d = cand; k = s; }
            break;  // masked hit: belongs to another site, try next direction
          }
        }
      }
      if (d < 0) continue;
      // the stub strip must not graze other free space on the way
      bool clear = true;
      int pad = hw + 2;
      for (int s = room_half + 1; s <= k - 3 && clear; ++s) {
        int sx = rx + dirs[d][0] * s, sy = ry + dirs[d][1] * s;
        if (dirs[d][0] != 0)  // horizontal stub: pad laterally in y
          clear = region_all_occupied(w, sx, sy - pad, sx, sy + pad);
        else
          clear = region_all_occupied(w, sx - pad, sy, sx + pad, sy);
      }
      if (!clear) continue;
      bool far_enough = true;
      for (const Site& s : sites) {
        double dx = s.departure.x - (rx + 0.5) * kCellSize;
        double dy = s.departure.y - (ry + 0.5) * kCellSize;
        if (dx * dx + dy * dy < 3.0 * 3.0) { far_enough = false; break; }
      }
      if (!far_enough) continue;

      int ax = rx + dirs[d][0] * k, ay = ry + dirs[d][1] * k;
      carve_rect(w, Rect{x0, y0, x1, y1});
      carve_corridor(w, rx, ry, ax, ay, hw, true);
      for (int my = std::min(ry, ay) - room_half; my <= std::max(ry, ay) + room_half; ++my)
        for (int mx = std::min(rx, ax) - room_half; mx <= std::max(rx, ax) + room_half; ++mx)
          if (w.in_bounds(mx, my) && !w.occupied(mx, my))
            site_mask[static_cast<size_t>(my) * W + mx] = 1;

      double px = (rx + 0.5) * kCellSize, py = (ry + 0.5) * kCellSize;
      double door_heading = std::atan2(static_cast<double>(dirs[d][1]),
                                       static_cast<double>(dirs[d][0]));
      Site site;
      site.departure = Pose{px, py, door_heading};                    // facing the door
      site.arrival = Pose{px, py, wrap_angle(door_heading + M_PI)};   // just drove in
      sites.push_back(site);
    }

    if (static_cast<int>(sites.size()) < spec.sites) continue;
    if (!w.connected_free_space()) continue;
    bool clear = true;
    for (const Site& s : sites)
      if (collision_check(w, s.departure, kRobotRadius)) { clear = false; break; }
    if (!clear) continue;
    return SiteWorld{std::move(w), std::move(sites)};
  }
  throw WorldGenError("failed to generate a site world");
}

}  // namespace bnav::sim
