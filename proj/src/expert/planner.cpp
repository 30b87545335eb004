#include "bnav/expert/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

#include "bnav/common.hpp"

namespace bnav::expert {

using sim::kCellSize;
using sim::World;

std::vector<uint8_t> inflate_grid(const World& world, double inflation) {
  int W = world.width_cells(), H = world.height_cells();
  std::vector<uint8_t> blocked(static_cast<size_t>(W) * H, 0);
  // stamp offsets whose cell center lies within `inflation` of an occupied
  // cell rectangle at the origin
  int K = static_cast<int>(std::ceil(inflation / kCellSize)) + 1;
  std::vector<std::pair<int, int>> stamp;
  for (int dy = -K; dy <= K; ++dy) {
    for (int dx = -K; dx <= K; ++dx) {
      double cx = (dx + 0.5) * kCellSize, cy = (dy + 0.5) * kCellSize;
      double px = std::clamp(cx, 0.0, kCellSize);
      double py = std::clamp(cy, 0.0, kCellSize);
      if (std::hypot(cx - px, cy - py) <= inflation) stamp.emplace_back(dx, dy);
    }
  }
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (!world.occupied(x, y)) continue;
      for (auto [dx, dy] : stamp) {
        int nx = x + dx, ny = y + dy;
        if (nx >= 0 && ny >= 0 && nx < W && ny < H)
          blocked[static_cast<size_t>(ny) * W + nx] = 1;
      }
    }
  }
  return blocked;
}

namespace {

// nearest unblocked cell by BFS ring, or -1
int snap_cell(const std::vector<uint8_t>& blocked, int W, int H, int cx, int cy,
              int max_ring) {
  if (cx < 0 || cy < 0 || cx >= W || cy >= H) return -1;
  if (!blocked[static_cast<size_t>(cy) * W + cx]) return cy * W + cx;
  for (int r = 1; r <= max_ring; ++r) {
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
        int nx = cx + dx, ny = cy + dy;
        if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
        if (!blocked[static_cast<size_t>(ny) * W + nx]) return ny * W + nx;
      }
    }
  }
  return -1;
}

bool los_clear(const std::vector<uint8_t>& blocked, int W, int H,
               const Vec2& a, const Vec2& b, double step) {
  double len = distance(a, b);
  int n = std::max(1, static_cast<int>(std::ceil(len / step)));
  for (int i = 0; i <= n; ++i) {
    double t = static_cast<double>(i) / n;
    Vec2 p = a + (b - a) * t;
    int cx = World::cell_of(p.x), cy = World::cell_of(p.y);
    if (cx < 0 || cy < 0 || cx >= W || cy >= H) return false;
    if (blocked[static_cast<size_t>(cy) * W + cx]) return false;
  }
  return true;
}

}  // namespace

double polyline_length(const std::vector<Vec2>& pts) {
  double s = 0.0;
  for (size_t i = 1; i < pts.size(); ++i) s += distance(pts[i - 1], pts[i]);
  return s;
}

Vec2 point_at_arc(const std::vector<Vec2>& pts, double s) {
  if (pts.empty()) return {};
  if (s <= 0.0) return pts.front();
  double acc = 0.0;
  for (size_t i = 1; i < pts.size(); ++i) {
    double seg = distance(pts[i - 1], pts[i]);
    if (acc + seg >= s && seg > 0.0) {
      double t = (s - acc) / seg;
      return pts[i - 1] + (pts[i] - pts[i - 1]) * t;
    }
    acc += seg;
  }
  return pts.back();
}

PlanResult plan_path(const World& world, const Vec2& start, const Vec2& goal,
                     const PlanParams& params) {
  int W = world.width_cells(), H = world.height_cells();
  auto blocked = inflate_grid(world, params.inflation);
  int max_ring = static_cast<int>(std::ceil(params.snap_radius / kCellSize));

  int s_idx = snap_cell(blocked, W, H, World::cell_of(start.x), World::cell_of(start.y), max_ring);
  int g_idx = snap_cell(blocked, W, H, World::cell_of(goal.x), World::cell_of(goal.y), max_ring);
  if (s_idx < 0) throw NoPathError("start cannot be snapped to free space");
  if (g_idx < 0) throw NoPathError("goal cannot be snapped to free space");

  // A* with octile heuristic; diagonal steps need both orthogonal neighbors free
  constexpr double kInf = 1e18;
  std::vector<double> g(static_cast<size_t>(W) * H, kInf);
  std::vector<int32_t> parent(static_cast<size_t>(W) * H, -1);
  const double D = kCellSize, D2 = kCellSize * std::numbers::sqrt2;
  int gx = g_idx % W, gy = g_idx / W;
  auto heur = [&](int idx) {
    int dx = std::abs(idx % W - gx), dy = std::abs(idx / W - gy);
    return D * std::max(dx, dy) + (D2 - D) * std::min(dx, dy);
  };
  using Node = std::tuple<double, double, int>;  // f, g, idx
  std::priority_queue<Node, std::vector<Node>, std::greater<>> open;
  g[s_idx] = 0.0;
  open.emplace(heur(s_idx), 0.0, s_idx);
  const int dxs[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  const int dys[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  while (!open.empty()) {
    auto [f, gc, idx] = open.top();
    open.pop();
    if (gc > g[idx]) continue;  // stale entry
    if (idx == g_idx) break;
    int x = idx % W, y = idx / W;
    for (int k = 0; k < 8; ++k) {
      int nx = x + dxs[k], ny = y + dys[k];
      if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
      size_t nidx = static_cast<size_t>(ny) * W + nx;
      if (blocked[nidx]) continue;
      if (k >= 4) {  // no corner cutting
        if (blocked[static_cast<size_t>(y) * W + nx]) continue;
        if (blocked[static_cast<size_t>(ny) * W + x]) continue;
      }
      double step = k < 4 ? D : D2;
      double ng = g[idx] + step;
      if (ng < g[nidx] - 1e-15) {
        g[nidx] = ng;
        parent[nidx] = idx;
        open.emplace(ng + heur(static_cast<int>(nidx)), ng, static_cast<int>(nidx));
      }
    }
  }
  if (g[g_idx] >= kInf) throw NoPathError("no route between start and goal");

  std::vector<Vec2> pts;
  pts.push_back(goal);
  for (int idx = g_idx; idx != s_idx; idx = parent[idx])
    pts.push_back(Vec2{(idx % W + 0.5) * kCellSize, (idx / W + 0.5) * kCellSize});
  pts.push_back(Vec2{(s_idx % W + 0.5) * kCellSize, (s_idx / W + 0.5) * kCellSize});
  pts.push_back(start);
  std::reverse(pts.begin(), pts.end());

  // greedy string pulling over the cell-center chain
  PlanResult out;
  out.grid_length = g[g_idx];
  out.waypoints.push_back(pts.front());
  size_t i = 0;
  while (i + 1 < pts.size()) {
    size_t j = pts.size() - 1;
    for (; j > i + 1; --j)
      if (los_clear(blocked, W, H, pts[i], pts[j], params.los_step)) break;
    out.waypoints.push_back(pts[j]);
    i = j;
  }
  out.length = polyline_length(out.waypoints);
  return out;
}

}  // namespace bnav::expert
