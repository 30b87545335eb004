#include "bnav/map/topo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

#include "bnav/threading.hpp"

namespace bnav::map {

std::vector<int> find_peaks(const std::vector<double>& trace, double prominence,
                            int min_separation) {
  int n = static_cast<int>(trace.size());
  struct Peak {
    int idx;
    double height;
  };
  std::vector<Peak> cands;
  for (int i = 1; i + 1 < n; ++i) {
    if (!(trace[static_cast<size_t>(i)] > trace[static_cast<size_t>(i - 1)] &&
          trace[static_cast<size_t>(i)] >= trace[static_cast<size_t>(i + 1)]))
      continue;
    double h = trace[static_cast<size_t>(i)];
    // prominence: drop to the lowest point before a higher sample, each side
    double left_min = h;
    for (int l = i - 1; l >= 0 && trace[static_cast<size_t>(l)] <= h; --l)
      left_min = std::min(left_min, trace[static_cast<size_t>(l)]);
    double right_min = h;
    for (int r = i + 1; r < n && trace[static_cast<size_t>(r)] <= h; ++r)
      right_min = std::min(right_min, trace[static_cast<size_t>(r)]);
    if (h - std::max(left_min, right_min) >= prominence)
      cands.push_back(Peak{i, h});
  }
  std::sort(cands.begin(), cands.end(), [](const Peak& a, const Peak& b) {
    if (a.height != b.height) return a.height > b.height;
    return a.idx < b.idx;
  });
  std::vector<int> keep;
  for (const Peak& p : cands) {
    bool clear = true;
    for (int k : keep)
      if (std::abs(k - p.idx) < min_separation) {
        clear = false;
        break;
      }
    if (clear) keep.push_back(p.idx);
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

ChoicePoints detect_choice_points(const std::vector<expert::KeptFrame>& kept,
                                  const DirectionClassifier& clf,
                                  const PeakParams& pp) {
  int n = static_cast<int>(kept.size());
  ChoicePoints cp;
  cp.sigma.assign(static_cast<size_t>(n), 0.0);
  parallel_for(n, [&](int64_t t) {
    std::vector<const sim::Observation*> w;
    for (int j = static_cast<int>(t) - clf.window() + 1; j <= static_cast<int>(t); ++j)
      w.push_back(&kept[static_cast<size_t>(std::max(0, j))].obs);
    cp.sigma[static_cast<size_t>(t)] = circular_variance(clf.predict_ptrs(w));
  });
  cp.indices = find_peaks(cp.sigma, pp.prominence, pp.min_separation);
  return cp;
}

std::vector<int> boundaries_with_hints(int num_kept, int frames_per_segment,
                                       const std::vector<int>& hints, int min_gap) {
  if (num_kept < 2) throw DatasetError("segmentation needs at least two kept frames");
  std::vector<int> sorted = hints;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<int> anchors{0};
  for (int h : sorted) {
    if (h < min_gap || h > num_kept - 1 - min_gap) continue;
    if (h - anchors.back() < min_gap) continue;
    anchors.push_back(h);
  }
  anchors.push_back(num_kept - 1);

  std::vector<int> out{0};
  for (size_t i = 0; i + 1 < anchors.size(); ++i) {
    int a = anchors[i], b = anchors[i + 1];
    std::vector<int> sub = exec::segment_boundaries(b - a + 1, frames_per_segment);
    for (size_t j = 1; j < sub.size(); ++j) out.push_back(a + sub[j]);
  }
  return out;
}

namespace {

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return na == nb ? 1.0 : 0.0;
  return dot / std::sqrt(na * nb);
}

// best cosine under circular shifts of the panorama halves; eight evenly
// spaced candidates approximate matching the same place at other headings
double best_shift_cosine(const std::vector<float>& a, const std::vector<float>& b) {
  int R = static_cast<int>(a.size()) / 2;
  int step = std::max(1, R / 8);
  double best = -1.0;
  std::vector<float> rot(a.size());
  for (int s = 0; s < R; s += step) {
    for (int i = 0; i < R; ++i) {
      int k = (i + s) % R;
      rot[static_cast<size_t>(i)] = a[static_cast<size_t>(k)];
      rot[static_cast<size_t>(R + i)] = a[static_cast<size_t>(R + k)];
    }
    best = std::max(best, cosine(rot, b));
  }
  return best;
}

uint64_t key_of(int u, int v) {
  if (u > v) std::swap(u, v);
  return (static_cast<uint64_t>(static_cast<uint32_t>(u)) << 32) |
         static_cast<uint32_t>(v);
}

}  // namespace

TopoMap build_map(const nn::CbeModel<float>& model, const DirectionClassifier* clf,
                  const std::vector<std::vector<expert::KeptFrame>>& demos,
                  const MapParams& params) {
  if (demos.empty()) throw DatasetError("map needs at least one demonstration");
  TopoMap m;
  m.params = params;
  for (size_t d = 0; d < demos.size(); ++d) {
    const std::vector<expert::KeptFrame>& kept = demos[d];
    if (kept.size() < 2) throw DatasetError("demonstration too short to map");
    std::vector<int> hints;
    if (params.use_choice_points && clf)
      hints = detect_choice_points(kept, *clf, params.peaks).indices;
    std::vector<int> bounds = boundaries_with_hints(
        static_cast<int>(kept.size()), params.frames_per_segment, hints,
        params.min_boundary_gap);

    std::vector<int> vid(bounds.size());
    for (size_t i = 0; i < bounds.size(); ++i) {
      MapVertex v;
      v.id = static_cast<int>(m.vertices.size());
      v.demo_id = static_cast<int>(d);
      v.frame_index = bounds[i];
      const sim::Observation& o = kept[static_cast<size_t>(bounds[i])].obs;
      v.feature = model.obs_features(o);
      v.rays = model.obs_input(o);
      vid[i] = v.id;
      m.vertices.push_back(std::move(v));
    }
    for (size_t i = 0; i + 1 < bounds.size(); ++i) {
      int a = bounds[i], b = bounds[i + 1];
      MapEdge e;
      e.type = EdgeType::Behavioral;
      e.from = vid[i];
      e.to = vid[i + 1];
      e.cost = kept[static_cast<size_t>(b)].src_index -
               kept[static_cast<size_t>(a)].src_index + 1;
      std::vector<sim::Observation> frames;
      for (int t = a; t <= b; ++t)
        frames.push_back(kept[static_cast<size_t>(t)].obs);
      e.embedding = model.encode_demo(frames);
      m.edges.push_back(std::move(e));
    }
  }
  link_attractors(&m, params.link_tau);
  return m;
}

void link_attractors(TopoMap* map, double tau) {
  double tau_base = tau - map->params.link_margin;
  std::set<uint64_t> existing;
  for (const MapEdge& e : map->edges)
    if (e.type == EdgeType::Proximal) existing.insert(key_of(e.from, e.to));

  int n = static_cast<int>(map->vertices.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const MapVertex& a = map->vertices[static_cast<size_t>(i)];
      const MapVertex& b = map->vertices[static_cast<size_t>(j)];
      if (a.demo_id == b.demo_id) continue;
      if (existing.count(key_of(a.id, b.id))) continue;
      if (cosine(a.feature, b.feature) < tau_base) continue;
      if (best_shift_cosine(a.rays, b.rays) < tau) continue;
      MapEdge e;
      e.type = EdgeType::Proximal;
      e.from = a.id;
      e.to = b.id;
      e.cost = map->params.proximal_cost;
      map->edges.push_back(std::move(e));
      existing.insert(key_of(a.id, b.id));
    }
  }
}

void dedupe_behaviors(TopoMap* map) {
  std::set<uint64_t> linked;
  for (const MapEdge& e : map->edges)
    if (e.type == EdgeType::Proximal) linked.insert(key_of(e.from, e.to));
  auto joined = [&](int u, int v) { return u == v || linked.count(key_of(u, v)) > 0; };

  std::vector<size_t> behavioral;
  for (size_t i = 0; i < map->edges.size(); ++i)
    if (map->edges[i].type == EdgeType::Behavioral) behavioral.push_back(i);

  std::vector<bool> dead(map->edges.size(), false);
  for (size_t a = 0; a < behavioral.size(); ++a) {
    if (dead[behavioral[a]]) continue;
    const MapEdge& ea = map->edges[behavioral[a]];
    for (size_t b = a + 1; b < behavioral.size(); ++b) {
      if (dead[behavioral[b]]) continue;
      const MapEdge& eb = map->edges[behavioral[b]];
      if (joined(ea.from, eb.from) && joined(ea.to, eb.to))
        dead[behavioral[b]] = true;  // the earlier edge plus links covers it
    }
  }
  std::vector<MapEdge> next;
  for (size_t i = 0; i < map->edges.size(); ++i)
    if (!dead[i]) next.push_back(std::move(map->edges[i]));
  map->edges = std::move(next);
}

int localize(const TopoMap& map, const nn::CbeModel<float>& model,
             const sim::Observation& obs) {
  if (map.vertices.empty()) throw LocalizationReject("empty map");
  std::vector<float> f = model.obs_features(obs);
  int best = -1;
  double best_sim = -2.0;
  for (const MapVertex& v : map.vertices) {
    double s = cosine(f, v.feature);
    if (s > best_sim) {  // ties keep the smaller id
      best_sim = s;
      best = v.id;
    }
  }
  if (best_sim < map.params.tau_loc)
    throw LocalizationReject("best similarity below threshold");
  return best;
}

RoutePlan plan_route(const TopoMap& map, int start_vertex, int goal_vertex) {
  int n = static_cast<int>(map.vertices.size());
  if (start_vertex < 0 || start_vertex >= n || goal_vertex < 0 || goal_vertex >= n)
    throw NoRouteError("vertex id out of range");

  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<size_t>(n));
  for (size_t ei = 0; ei < map.edges.size(); ++ei) {
    const MapEdge& e = map.edges[ei];
    adj[static_cast<size_t>(e.from)].push_back({e.to, static_cast<int>(ei)});
    if (e.type == EdgeType::Proximal)
      adj[static_cast<size_t>(e.to)].push_back({e.from, static_cast<int>(ei)});
  }

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<size_t>(n), inf);
  std::vector<std::pair<int, int>> prev(static_cast<size_t>(n), {-1, -1});
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  dist[static_cast<size_t>(start_vertex)] = 0.0;
  pq.push({0.0, start_vertex});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[static_cast<size_t>(u)]) continue;
    if (u == goal_vertex) break;
    for (auto [v, ei] : adj[static_cast<size_t>(u)]) {
      double nd = d + map.edges[static_cast<size_t>(ei)].cost;
      if (nd < dist[static_cast<size_t>(v)]) {
        dist[static_cast<size_t>(v)] = nd;
        prev[static_cast<size_t>(v)] = {u, ei};
        pq.push({nd, v});
      }
    }
  }
  if (dist[static_cast<size_t>(goal_vertex)] == inf)
    throw NoRouteError("goal vertex unreachable");

  RoutePlan plan;
  plan.cost = dist[static_cast<size_t>(goal_vertex)];
  for (int v = goal_vertex; v != start_vertex;) {
    auto [u, ei] = prev[static_cast<size_t>(v)];
    plan.vertex_path.push_back(v);
    plan.edge_path.push_back(ei);
    v = u;
  }
  plan.vertex_path.push_back(start_vertex);
  std::reverse(plan.vertex_path.begin(), plan.vertex_path.end());
  std::reverse(plan.edge_path.begin(), plan.edge_path.end());

  for (size_t i = 0; i < plan.edge_path.size(); ++i) {
    const MapEdge& e = map.edges[static_cast<size_t>(plan.edge_path[i])];
    if (e.type != EdgeType::Behavioral) continue;  // alignment via next start
    BehaviorStep s;
    s.z = e.embedding;
    s.A_start = map.vertices[static_cast<size_t>(e.from)].feature;
    s.A_goal = map.vertices[static_cast<size_t>(e.to)].feature;
    s.nominal_steps = static_cast<int>(std::lround(e.cost));
    s.edge_index = plan.edge_path[i];
    plan.behaviors.push_back(std::move(s));
  }
  return plan;
}

RoutePlan plan_route(const TopoMap& map, const nn::CbeModel<float>& model,
                     const sim::Observation& start_obs,
                     const sim::Observation& goal_obs) {
  int s = localize(map, model, start_obs);
  int g = localize(map, model, goal_obs);
  return plan_route(map, s, g);
}

double connectivity_metric(const TopoMap& map, const nn::CbeModel<float>& model,
                           const sim::World& world,
                           const std::vector<Pose>& locations) {
  size_t n = locations.size();
  if (n < 2) throw DatasetError("connectivity needs at least two locations");
  std::vector<int> vertex(n, -1);
  for (size_t i = 0; i < n; ++i) {
    try {
      vertex[i] = localize(map, model, sim::render(world, locations[i]));
    } catch (const LocalizationReject&) {
    }
  }
  int ok = 0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (vertex[i] < 0 || vertex[j] < 0) continue;
      try {
        plan_route(map, vertex[i], vertex[j]);
        ++ok;
      } catch (const NoRouteError&) {
      }
    }
  }
  return static_cast<double>(ok) / static_cast<double>(n * (n - 1));
}

exec::SequenceResult execute_route(const sim::World& world,
                                   const nn::CbeModel<float>& model,
                                   const RoutePlan& plan, const Pose& start,
                                   const exec::ExecParams& params, Rng& rng,
                                   std::vector<exec::TraceRow>* trace) {
  exec::SequenceResult res;
  res.completed = true;
  Pose pose = start;
  for (size_t s = 0; s < plan.behaviors.size(); ++s) {
    const BehaviorStep& b = plan.behaviors[s];
    int budget = std::max(20, static_cast<int>(std::lround(
                                  params.budget_factor * b.nominal_steps)));
    exec::BehaviorResult br = exec::execute_behavior(
        world, model, b.z, b.A_start, b.A_goal, pose, budget, params, rng,
        nullptr, trace, static_cast<int>(s));
    pose = br.final_pose;
    res.total_steps += br.steps;
    res.statuses.push_back(br.status);
    if (br.status == exec::SegmentStatus::Crashed) {
      res.completed = false;
      res.final_pose = pose;
      return res;
    }
    if (br.status != exec::SegmentStatus::Switched) res.completed = false;
  }
  res.final_pose = pose;
  return res;
}

namespace {

uint64_t params_hash(const MapParams& p) {
  uint64_t h = 0x9e3779b97f4a7c15ull;
  auto fold = [&h](uint64_t v) { h = mix64(h, v); };
  fold(static_cast<uint64_t>(p.frames_per_segment));
  fold(std::bit_cast<uint64_t>(p.link_tau));
  fold(std::bit_cast<uint64_t>(p.link_margin));
  fold(std::bit_cast<uint64_t>(p.proximal_cost));
  fold(std::bit_cast<uint64_t>(p.tau_loc));
  fold(std::bit_cast<uint64_t>(p.peaks.prominence));
  fold(static_cast<uint64_t>(p.peaks.min_separation));
  fold(static_cast<uint64_t>(p.min_boundary_gap));
  fold(p.use_choice_points ? 1 : 0);
  return h;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <typename T>
void put_raw(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get_raw(std::ifstream& is, const std::string& path) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("truncated map file: " + path);
  return v;
}

}  // namespace

void save_map(const std::string& path, const TopoMap& map) {
  size_t feat_dim = map.vertices.empty() ? 0 : map.vertices.front().feature.size();
  size_t ray_dim = map.vertices.empty() ? 0 : map.vertices.front().rays.size();
  for (const MapVertex& v : map.vertices)
    if (v.feature.size() != feat_dim || v.rays.size() != ray_dim)
      throw IoError("inconsistent vertex feature sizes");

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open map for write: " + path);
  const MapParams& p = map.params;
  os << "BNAVMAP 1\n"
     << "vertices " << map.vertices.size() << "\n"
     << "edges " << map.edges.size() << "\n"
     << "feat_dim " << feat_dim << "\n"
     << "ray_dim " << ray_dim << "\n"
     << "frames_per_segment " << p.frames_per_segment << "\n"
     << "link_tau " << fmt(p.link_tau) << "\n"
     << "link_margin " << fmt(p.link_margin) << "\n"
     << "proximal_cost " << fmt(p.proximal_cost) << "\n"
     << "tau_loc " << fmt(p.tau_loc) << "\n"
     << "peak_prominence " << fmt(p.peaks.prominence) << "\n"
     << "peak_separation " << p.peaks.min_separation << "\n"
     << "min_boundary_gap " << p.min_boundary_gap << "\n"
     << "use_choice_points " << (p.use_choice_points ? 1 : 0) << "\n"
     << "params_hash " << std::hex << params_hash(p) << std::dec << "\n"
     << "end_header\n";

  for (const MapVertex& v : map.vertices) {
    put_raw(os, static_cast<int32_t>(v.id));
    put_raw(os, static_cast<int32_t>(v.demo_id));
    put_raw(os, static_cast<int32_t>(v.frame_index));
    if (feat_dim)
      os.write(reinterpret_cast<const char*>(v.feature.data()),
               static_cast<std::streamsize>(sizeof(float) * feat_dim));
    if (ray_dim)
      os.write(reinterpret_cast<const char*>(v.rays.data()),
               static_cast<std::streamsize>(sizeof(float) * ray_dim));
  }
  for (const MapEdge& e : map.edges) {
    put_raw(os, static_cast<uint8_t>(e.type));
    put_raw(os, static_cast<int32_t>(e.from));
    put_raw(os, static_cast<int32_t>(e.to));
    put_raw(os, e.cost);
    put_raw(os, static_cast<uint32_t>(e.embedding.size()));
    if (!e.embedding.empty())
      os.write(reinterpret_cast<const char*>(e.embedding.data()),
               static_cast<std::streamsize>(sizeof(float) * e.embedding.size()));
  }
  if (!os) throw IoError("map write failed: " + path);
}

TopoMap load_map(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open map for read: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "BNAVMAP 1")
    throw IoError("bad map magic: " + path);

  TopoMap m;
  size_t n_vert = 0, n_edge = 0, feat_dim = 0, ray_dim = 0;
  uint64_t stored_hash = 0;
  bool saw_end = false;
  while (std::getline(is, line)) {
    if (line == "end_header") {
      saw_end = true;
      break;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    MapParams& p = m.params;
    if (key == "vertices") ls >> n_vert;
    else if (key == "edges") ls >> n_edge;
    else if (key == "feat_dim") ls >> feat_dim;
    else if (key == "ray_dim") ls >> ray_dim;
    else if (key == "frames_per_segment") ls >> p.frames_per_segment;
    else if (key == "link_tau") ls >> p.link_tau;
    else if (key == "link_margin") ls >> p.link_margin;
    else if (key == "proximal_cost") ls >> p.proximal_cost;
    else if (key == "tau_loc") ls >> p.tau_loc;
    else if (key == "peak_prominence") ls >> p.peaks.prominence;
    else if (key == "peak_separation") ls >> p.peaks.min_separation;
    else if (key == "min_boundary_gap") ls >> p.min_boundary_gap;
    else if (key == "use_choice_points") {
      int b = 0;
      ls >> b;
      p.use_choice_points = b != 0;
    } else if (key == "params_hash") ls >> std::hex >> stored_hash >> std::dec;
    else throw IoError("unknown map header key: " + key);
    if (!ls) throw IoError("bad map header line: " + line);
  }
  if (!saw_end) throw IoError("map header not terminated: " + path);
  if (params_hash(m.params) != stored_hash)
    throw IoError("map parameter hash mismatch: " + path);

  m.vertices.resize(n_vert);
  for (size_t i = 0; i < n_vert; ++i) {
    MapVertex& v = m.vertices[i];
    v.id = get_raw<int32_t>(is, path);
    v.demo_id = get_raw<int32_t>(is, path);
    v.frame_index = get_raw<int32_t>(is, path);
    if (v.id != static_cast<int>(i)) throw IoError("map vertices out of order");
    v.feature.resize(feat_dim);
    if (feat_dim)
      is.read(reinterpret_cast<char*>(v.feature.data()),
              static_cast<std::streamsize>(sizeof(float) * feat_dim));
    v.rays.resize(ray_dim);
    if (ray_dim)
      is.read(reinterpret_cast<char*>(v.rays.data()),
              static_cast<std::streamsize>(sizeof(float) * ray_dim));
    if (!is) throw IoError("truncated map file: " + path);
  }
  m.edges.resize(n_edge);
  for (size_t i = 0; i < n_edge; ++i) {
    MapEdge& e = m.edges[i];
    e.type = static_cast<EdgeType>(get_raw<uint8_t>(is, path));
    e.from = get_raw<int32_t>(is, path);
    e.to = get_raw<int32_t>(is, path);
    e.cost = get_raw<double>(is, path);
    uint32_t ne = get_raw<uint32_t>(is, path);
    e.embedding.resize(ne);
    if (ne)
      is.read(reinterpret_cast<char*>(e.embedding.data()),
              static_cast<std::streamsize>(sizeof(float) * ne));
    if (!is) throw IoError("truncated map file: " + path);
    if (e.from < 0 || e.from >= static_cast<int>(n_vert) || e.to < 0 ||
        e.to >= static_cast<int>(n_vert))
      throw IoError("map edge endpoint out of range");
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw IoError("trailing bytes in map file: " + path);
  return m;
}

}  // namespace bnav::map
