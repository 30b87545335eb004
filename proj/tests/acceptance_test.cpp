// Acceptance gate for the full stack. Criteria 1-9 are exact property
// checks; criteria 10-16 train the default pipeline end to end and test the
// measured trends. Prints one PASS/FAIL line per criterion and exits with
// the number of failures. --reuse picks up artifacts from a previous run in
// the same output directory instead of re-training.
#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "bnav/eval/config.hpp"
#include "bnav/eval/experiments.hpp"
#include "bnav/eval/metrics.hpp"
#include "bnav/exec/executor.hpp"
#include "bnav/expert/dataset.hpp"
#include "bnav/map/classifier.hpp"
#include "bnav/map/topo.hpp"
#include "bnav/nn/model.hpp"
#include "bnav/sim/dynamics.hpp"
#include "bnav/sim/sensor.hpp"
#include "bnav/threading.hpp"
#include "bnav/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace bnav;

namespace {

struct Criterion {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<Criterion> g_results;

void record(int id, const std::string& name, bool pass, const std::string& detail) {
  g_results.push_back({id, name, pass, detail});
  std::cerr << "  [" << id << "] " << (pass ? "ok" : "FAILED") << " - " << detail
            << "\n";
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

// ---------------------------------------------------------------------------
// criterion 1: demonstration labels

void check_labels(const expert::Dataset& ds) {
  int demos = 0;
  double worst_rt = 0.0;
  bool endpoints_ok = true, monotone_ok = true;
  for (const expert::TrainRecord& rec : ds.records) {
    if (rec.encoder_source >= 0) continue;  // relabeled streams are on-policy
    ++demos;
    double prev = -1.0;
    for (size_t t = 0; t < rec.kept.size(); ++t) {
      expert::Labels lb = expert::compute_labels(rec.kept, rec.kept[t].pose);
      if (t == 0 && lb.phi != 0.0) endpoints_ok = false;
      if (t + 1 == rec.kept.size() && lb.phi != 1.0) endpoints_ok = false;
      if (lb.phi < prev) monotone_ok = false;
      prev = lb.phi;
    }
    for (const expert::QueryFrame& q : rec.exec) {
      expert::Labels lb = expert::compute_labels(rec.kept, q.pose);
      Vec2 global = q.pose.from_frame({lb.wp_x, lb.wp_y});
      Vec2 back = q.pose.to_frame(global);
      double err = std::hypot(back.x - lb.wp_x, back.y - lb.wp_y);
      worst_rt = std::max(worst_rt, err);
    }
  }
  bool pass = demos > 0 && endpoints_ok && monotone_ok && worst_rt <= 1e-9;
  record(1, "demonstration labels", pass,
         std::to_string(demos) + " demos: phi endpoints " +
             (endpoints_ok ? "exact" : "WRONG") + ", monotone " +
             (monotone_ok ? "exact" : "WRONG") +
             ", waypoint round trip <= " + fmt("%.2e", worst_rt) + " m");
}

// ---------------------------------------------------------------------------
// criterion 2: gradient check (double precision, small model)

sim::Observation synth_obs(uint64_t tag) {
  sim::Observation o;
  Rng rng(mix64(tag, 0x0b5));
  for (int i = 0; i < sim::kNumRays; ++i) {
    o.depth[static_cast<size_t>(i)] = static_cast<float>(rng.uniform(0.3, 5.0));
    o.appearance[static_cast<size_t>(i)] = static_cast<float>(rng.uniform(0.0, 1.0));
  }
  return o;
}

expert::TrainRecord synth_record(uint64_t tag, int frames) {
  expert::TrainRecord rec;
  Rng rng(mix64(tag, 0xba5e));
  double cum = 0.0;
  for (int t = 0; t < frames; ++t) {
    expert::KeptFrame k;
    k.src_index = 2 * t;
    k.pose = Pose{0.4 * t, 0.1, 0.0};
    k.obs = synth_obs(tag * 100 + static_cast<uint64_t>(t));
    if (t > 0) cum += 0.4;
    k.cum_len = cum;
    rec.kept.push_back(k);
    expert::QueryFrame q;
    q.pose = k.pose;
    q.obs = synth_obs(tag * 100 + 50 + static_cast<uint64_t>(t));
    q.wp_x = static_cast<float>(rng.uniform(-1.0, 1.0));
    q.wp_y = static_cast<float>(rng.uniform(-1.0, 1.0));
    q.phi = static_cast<float>(rng.uniform(0.0, 1.0));
    rec.exec.push_back(q);
  }
  rec.total_len = cum;
  rec.goal = rec.kept.back().pose.position();
  return rec;
}

void check_gradients() {
  nn::ModelDims d;
  d.rays = 8;
  d.conv_ch = 2;
  d.obs_feat = 6;
  d.proj = 4;
  d.rel = 5;
  d.z = 3;
  d.enc_in = 4;
  d.hidden = 5;
  nn::CbeModel<double> model(d, 2026);
  size_t np = model.num_params();

  std::vector<expert::TrainRecord> all{synth_record(1, 6)};
  nn::Grads<double> g = model.params().make_grads();
  model.record_grad(all[0], all, 1.0, &g);

  auto& ps = model.params();
  Rng rng(404);
  double worst = 0.0;
  for (int pt = 0; pt < 20; ++pt) {
    size_t ti = rng.uniform_int(ps.tensors().size());
    size_t k = rng.uniform_int(ps.at(static_cast<int>(ti)).size());
    double* p = &ps.at(static_cast<int>(ti)).v[k];
    double orig = *p, h = 1e-6;
    *p = orig + h;
    double lp = model.record_grad(all[0], all, 1.0, nullptr).loss;
    *p = orig - h;
    double lm = model.record_grad(all[0], all, 1.0, nullptr).loss;
    *p = orig;
    double num = (lp - lm) / (2.0 * h);
    double ana = g[ti][k];
    double rel = std::abs(num - ana) / std::max(1e-8, std::abs(num) + std::abs(ana));
    worst = std::max(worst, rel);
  }
  record(2, "gradient check", np <= 1000 && worst <= 1e-4,
         std::to_string(np) + " params, 20 random points, worst relative error " +
             fmt("%.2e", worst));
}

// ---------------------------------------------------------------------------
// criterion 3: actuation noise model

void check_noise_model() {
  sim::MotionLimits lim;
  Rng rng(7);
  bool exact = true;
  Pose p{2.0, 3.0, 0.4};
  for (int i = 0; i < 1000; ++i) {
    sim::Command c{rng.uniform(0.0, 1.2), rng.uniform(-2.0, 2.0)};
    Pose a = sim::step_dynamics(p, c, lim, sim::NoiseModel{0.0}, rng);
    double v = std::clamp(c.v, 0.0, lim.v_max);
    double w = std::clamp(c.omega, -lim.omega_max, lim.omega_max);
    Pose b;
    b.theta = wrap_angle(p.theta + w * sim::kDt);
    b.x = p.x + v * std::cos(b.theta) * sim::kDt;
    b.y = p.y + v * std::sin(b.theta) * sim::kDt;
    if (a.x != b.x || a.y != b.y || a.theta != b.theta) exact = false;
    p = a;
  }
  bool range_ok = true;
  double worst_mean = 0.0;
  for (double s : {0.5, 1.0}) {
    sim::NoiseModel nm{s};
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
      double u = nm.sample(rng);
      if (u < 1.0 - s || u > 1.0 + s) range_ok = false;
      sum += u;
    }
    worst_mean = std::max(worst_mean, std::abs(sum / 100000.0 - 1.0));
  }
  record(3, "actuation noise model", exact && range_ok && worst_mean <= 0.01,
         std::string("s=0 integration ") + (exact ? "bit-exact" : "DIFFERS") +
             ", samples " + (range_ok ? "in [1-s,1+s]" : "OUT OF RANGE") +
             ", |mean-1| <= " + fmt("%.4f", worst_mean));
}

// ---------------------------------------------------------------------------
// criterion 4: route planner vs exhaustive search

double brute_force_route(const map::TopoMap& m, int s, int g) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<char> used(m.vertices.size(), 0);
  double best = inf;
  std::function<void(int, double)> dfs = [&](int v, double cost) {
    if (cost >= best) return;
    if (v == g) {
      best = cost;
      return;
    }
    used[static_cast<size_t>(v)] = 1;
    for (const map::MapEdge& e : m.edges) {
      int next = -1;
      if (e.from == v) next = e.to;
      else if (e.type == map::EdgeType::Proximal && e.to == v) next = e.from;
      if (next >= 0 && !used[static_cast<size_t>(next)]) dfs(next, cost + e.cost);
    }
    used[static_cast<size_t>(v)] = 0;
  };
  dfs(s, 0.0);
  return best;
}

void check_dijkstra() {
  Rng rng(99);
  int agree = 0, graphs = 100;
  for (int gi = 0; gi < graphs; ++gi) {
    map::TopoMap m;
    int n = 2 + static_cast<int>(rng.uniform_int(7));  // 2..8 vertices
    for (int v = 0; v < n; ++v) {
      map::MapVertex mv;
      mv.id = v;
      m.vertices.push_back(mv);
    }
    int ne = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(2 * n)));
    for (int e = 0; e < ne; ++e) {
      map::MapEdge me;
      me.from = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n)));
      me.to = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n)));
      if (me.from == me.to) continue;
      me.type = rng.uniform() < 0.3 ? map::EdgeType::Proximal
                                    : map::EdgeType::Behavioral;
      me.cost = 1.0 + static_cast<double>(rng.uniform_int(20));
      m.edges.push_back(me);
    }
    int s = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n)));
    int g = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n)));
    double expect = brute_force_route(m, s, g);
    double got = std::numeric_limits<double>::infinity();
    try {
      got = map::plan_route(m, s, g).cost;
    } catch (const NoRouteError&) {
    }
    if (got == expect) ++agree;
  }
  record(4, "route planner vs exhaustive search", agree == graphs,
         std::to_string(agree) + "/" + std::to_string(graphs) +
             " random graphs agree exactly");
}

// ---------------------------------------------------------------------------
// criterion 5: circular variance extremes

void check_circular_variance() {
  std::vector<float> point(128, 0.0f), flat(128, 1.0f / 128.0f);
  point[17] = 1.0f;
  double sp = map::circular_variance(point);
  double sf = map::circular_variance(flat);
  record(5, "circular variance extremes", std::abs(sp) <= 1e-9 && std::abs(sf - 1.0) <= 1e-9,
         "point mass " + fmt("%.2e", sp) + ", uniform " + fmt("%.9f", sf));
}

// ---------------------------------------------------------------------------
// criteria 6 + 7: segmentation contract and memory accounting

std::vector<expert::KeptFrame> synth_kept(const sim::World& world, int frames) {
  // straight-line poses across the open interior, jittered obs via texture
  std::vector<expert::KeptFrame> kept;
  for (int t = 0; t < frames; ++t) {
    expert::KeptFrame k;
    k.src_index = 2 * t;
    double a = static_cast<double>(t) / std::max(1, frames - 1);
    k.pose = Pose{1.0 + a * (world.width_m() - 2.0),
                  world.height_m() * 0.5, 0.0};
    k.obs = sim::render(world, k.pose);
    k.cum_len = a * (world.width_m() - 2.0);
    kept.push_back(k);
  }
  return kept;
}

sim::World open_arena(double w_m, double h_m) {
  int wc = static_cast<int>(w_m / sim::kCellSize);
  int hc = static_cast<int>(h_m / sim::kCellSize);
  std::string art;
  for (int y = 0; y < hc; ++y) {
    for (int x = 0; x < wc; ++x)
      art += (x == 0 || y == 0 || x == wc - 1 || y == hc - 1) ? '#' : '.';
    art += '\n';
  }
  return sim::World::from_ascii(art, 12);
}

void check_segmentation(const nn::CbeModel<float>& model) {
  Rng rng(31);
  bool spans_ok = true;
  for (int n : {5, 37, 101, 450}) {
    for (int K = 2; K <= 64; ++K) {
      std::vector<int> b = exec::segment_boundaries(n, K);
      if (b.front() != 0 || b.back() != n - 1) spans_ok = false;
      for (size_t i = 1; i < b.size(); ++i)
        if (b[i] <= b[i - 1] || b[i] - b[i - 1] > K) spans_ok = false;
    }
  }
  sim::World arena = open_arena(12.0, 4.0);
  std::vector<expert::KeptFrame> kept = synth_kept(arena, 450);
  exec::BehaviorMemory mem = exec::build_memory(model, kept, 120);
  bool four = mem.count() == 4 && mem.attractors.size() == 5;
  record(6, "segmentation contract", spans_ok && four,
         std::string("spans ") + (spans_ok ? "<= K with shared boundaries" : "BROKEN") +
             "; 450 frames at K=120 -> " + std::to_string(mem.count()) +
             " segments, " + std::to_string(mem.attractors.size()) + " attractors");

  exec::BehaviorMemory mem5 = exec::build_memory(model, kept, 90);
  bool bytes_ok = mem5.count() == 5 && mem5.attractors.size() == 6 &&
                  mem5.bytes() == 19840;
  record(7, "route memory accounting", bytes_ok,
         std::to_string(mem5.attractors.size()) + " attractors + " +
             std::to_string(mem5.count()) + " embeddings = " +
             std::to_string(mem5.bytes()) + " bytes (expect 19840)");
}

// ---------------------------------------------------------------------------
// criterion 9 scenario (also exercises the map round trip for criterion 8)

bool s_map_roundtrip = false;

sim::World crossing_world() {
  const int wc = 100, hc = 80;  // 10 x 8 m at 0.1 m cells
  std::vector<std::string> rows(hc, std::string(wc, '#'));
  auto carve = [&](double x0, double x1, double y0, double y1) {
    for (int y = static_cast<int>(y0 * 10); y < static_cast<int>(y1 * 10); ++y)
      for (int x = static_cast<int>(x0 * 10); x < static_cast<int>(x1 * 10); ++x)
        rows[static_cast<size_t>(y)][static_cast<size_t>(x)] = '.';
  };
  carve(0.5, 9.5, 3.0, 4.0);   // west-east corridor
  carve(2.0, 3.0, 0.5, 3.0);   // south arm at x ~ 2.5
  carve(6.0, 7.0, 4.0, 7.5);   // north arm at x ~ 6.5
  std::string art;
  for (int y = hc - 1; y >= 0; --y) art += rows[static_cast<size_t>(y)] + '\n';
  return sim::World::from_ascii(art, 5);
}

std::vector<expert::KeptFrame> demo_from_poses(const sim::World& world,
                                               const std::vector<Pose>& poses) {
  std::vector<expert::KeptFrame> kept;
  double cum = 0.0;
  for (size_t i = 0; i < poses.size(); ++i) {
    if (i > 0)
      cum += std::hypot(poses[i].x - poses[i - 1].x, poses[i].y - poses[i - 1].y);
    expert::KeptFrame k;
    k.src_index = static_cast<int>(3 * i);
    k.pose = poses[i];
    k.obs = sim::render(world, poses[i]);
    k.cum_len = cum;
    kept.push_back(k);
  }
  return kept;
}

void check_composition_and_map_io(const nn::CbeModel<float>& model,
                                  const std::string& out_dir) {
  sim::World world = crossing_world();

  std::vector<Pose> d1;  // A -> B straight along the corridor
  for (int k = 0; k <= 32; ++k) d1.push_back({1.0 + 0.25 * k, 3.5, 0.0});

  std::vector<Pose> d2;  // C -> D: south arm, east overlap, north arm
  for (int k = 0; k < 8; ++k) d2.push_back({2.5, 1.0 + 0.25 * k, M_PI / 2});
  for (int k = 0; k <= 14; ++k) d2.push_back({3.0 + 0.25 * k, 3.5, 0.0});
  for (int k = 0; k <= 12; ++k) d2.push_back({6.5, 4.0 + 0.25 * k, M_PI / 2});

  map::MapParams mp;
  mp.use_choice_points = false;
  mp.frames_per_segment = 8;
  std::vector<std::vector<expert::KeptFrame>> demos{
      demo_from_poses(world, d1), demo_from_poses(world, d2)};
  map::TopoMap m = map::build_map(model, nullptr, demos, mp);

  bool crossed = false, before_demo0 = false, after_demo1 = false;
  std::string shape = "no route";
  try {
    // start of demo 1 to the last vertex of demo 2
    int goal = -1;
    for (const map::MapVertex& v : m.vertices)
      if (v.demo_id == 1) goal = v.id;
    map::RoutePlan plan = map::plan_route(m, 0, goal);
    int prox_at = -1;
    for (size_t i = 0; i < plan.edge_path.size(); ++i)
      if (m.edges[static_cast<size_t>(plan.edge_path[i])].type ==
          map::EdgeType::Proximal)
        prox_at = static_cast<int>(i);
    crossed = prox_at >= 0;
    for (size_t i = 0; i < plan.edge_path.size(); ++i) {
      const map::MapEdge& e = m.edges[static_cast<size_t>(plan.edge_path[i])];
      if (e.type != map::EdgeType::Behavioral) continue;
      int demo = m.vertices[static_cast<size_t>(e.from)].demo_id;
      if (static_cast<int>(i) < prox_at && demo == 0) before_demo0 = true;
      if (static_cast<int>(i) > prox_at && demo == 1) after_demo1 = true;
    }
    shape = std::to_string(plan.behaviors.size()) + " behaviors, " +
            std::to_string(plan.edge_path.size()) + " edges";
  } catch (const NoRouteError&) {
  }
  record(9, "composition across linked demonstrations",
         crossed && before_demo0 && after_demo1,
         shape + "; crosses a proximal link with behaviors from both sides: " +
             (crossed && before_demo0 && after_demo1 ? "yes" : "NO"));

  // criterion 8c uses this map: save -> load -> identical
  fs::create_directories(out_dir);
  std::string path = out_dir + "/crossing.map";
  map::save_map(path, m);
  map::TopoMap back = map::load_map(path);
  bool same = m.vertices.size() == back.vertices.size() &&
              m.edges.size() == back.edges.size();
  if (same)
    for (size_t i = 0; i < m.vertices.size(); ++i) {
      same = same && m.vertices[i].feature == back.vertices[i].feature &&
             m.vertices[i].rays == back.vertices[i].rays &&
             m.vertices[i].demo_id == back.vertices[i].demo_id;
    }
  if (same)
    for (size_t i = 0; i < m.edges.size(); ++i) {
      same = same && m.edges[i].from == back.edges[i].from &&
             m.edges[i].to == back.edges[i].to &&
             m.edges[i].type == back.edges[i].type &&
             m.edges[i].cost == back.edges[i].cost &&
             m.edges[i].embedding == back.edges[i].embedding;
    }
  s_map_roundtrip = same;
}

// ---------------------------------------------------------------------------
// criterion 8: serialization round trips (model, dataset, map)

void check_serialization(const nn::CbeModel<float>& model, const std::string& out_dir) {
  fs::create_directories(out_dir);

  std::string ck = out_dir + "/roundtrip.ckpt";
  nn::save_checkpoint(ck, model.params());
  nn::CbeModel<float> other(nn::ModelDims{}, 999);
  nn::load_checkpoint(ck, &other.params());
  bool model_ok = true;
  for (size_t t = 0; t < model.params().tensors().size(); ++t)
    if (model.params().at(static_cast<int>(t)).v !=
        other.params().at(static_cast<int>(t)).v)
      model_ok = false;

  expert::DatasetConfig dc;
  dc.world_seeds = {41};
  dc.world_spec.width_m = 9.0;
  dc.world_spec.height_m = 9.0;
  dc.world_spec.rooms = 4;
  dc.demos_per_world = 6;
  expert::Dataset small = expert::generate_dataset(dc);
  std::string dd = out_dir + "/roundtrip_data";
  fs::remove_all(dd);
  small.save(dd);
  expert::Dataset loaded = expert::Dataset::load(dd);
  bool data_ok = small.records.size() == loaded.records.size();
  for (size_t r = 0; data_ok && r < small.records.size(); ++r) {
    const expert::TrainRecord &a = small.records[r], &b = loaded.records[r];
    data_ok = a.kept.size() == b.kept.size() && a.exec.size() == b.exec.size() &&
              a.total_len == b.total_len && a.goal.x == b.goal.x;
    for (size_t t = 0; data_ok && t < a.kept.size(); ++t) {
      data_ok = a.kept[t].pose.x == b.kept[t].pose.x &&
                a.kept[t].pose.theta == b.kept[t].pose.theta &&
                a.kept[t].cum_len == b.kept[t].cum_len &&
                a.kept[t].obs.depth == b.kept[t].obs.depth;
    }
    for (size_t t = 0; data_ok && t < a.exec.size(); ++t)
      data_ok = a.exec[t].wp_x == b.exec[t].wp_x && a.exec[t].phi == b.exec[t].phi;
  }

  record(8, "serialization round trips", model_ok && data_ok && s_map_roundtrip,
         std::string("checkpoint ") + (model_ok ? "ok" : "DIFFERS") + ", dataset " +
             (data_ok ? "ok" : "DIFFERS") + ", map " +
             (s_map_roundtrip ? "ok" : "DIFFERS"));
}

// ---------------------------------------------------------------------------
// stage II: the trained pipeline and its measured trends

const eval::MetricsRow* find_row(const eval::MetricsTable& t, const std::string& c) {
  for (const eval::MetricsRow& r : t.rows)
    if (r.condition == c) return &r;
  return nullptr;
}

// X >= Y allowing for both intervals' uncertainty
bool geq_within_ci(const eval::MetricsRow& x, const eval::MetricsRow& y) {
  return x.ci_hi >= y.ci_lo;
}

int jittered_successes(const eval::ExperimentConfig& cfg,
                       const nn::CbeModel<float>& model, int target_steps) {
  std::vector<sim::World> worlds;
  for (uint64_t s : cfg.heldout_seeds)
    worlds.push_back(sim::World::generate(s, cfg.eval_world));
  std::vector<int> wins(static_cast<size_t>(cfg.trials), 0);
  parallel_for(cfg.trials, [&](int64_t t) {
    Rng rng(mix64(mix64(cfg.master_seed, 0xdacc), static_cast<uint64_t>(t) + 1));
    const sim::World& world = worlds[static_cast<size_t>(t) % worlds.size()];
    eval::EvalBehavior b =
        eval::sample_eval_behavior(world, model, target_steps, cfg, rng);
    eval::TrialResult res = eval::run_behavior_trial(
        world, model, b, cfg.exec_params, cfg.success_radius, rng);
    wins[static_cast<size_t>(t)] = res.success ? 1 : 0;
  });
  int total = 0;
  for (int w : wins) total += w;
  return total;
}

struct Artifacts {
  expert::Dataset ds;
  nn::CbeModel<float> bc{nn::ModelDims{}, 1};
  nn::CbeModel<float> model{nn::ModelDims{}, 1};
  map::DirectionClassifier clf;
};

void copy_params(const nn::CbeModel<float>& from, nn::CbeModel<float>* to) {
  for (size_t t = 0; t < from.params().tensors().size(); ++t)
    to->params().at(static_cast<int>(t)).v = from.params().at(static_cast<int>(t)).v;
}

Artifacts build_pipeline(const eval::ExperimentConfig& cfg, bool reuse) {
  Artifacts art;
  std::string data_dir = cfg.out_dir + "/data";
  std::string bc_path = cfg.out_dir + "/model_bc.ckpt";
  std::string final_path = cfg.out_dir + "/model.ckpt";
  std::string clf_path = cfg.out_dir + "/classifier.dir";

  if (reuse && fs::exists(data_dir + "/manifest.json")) {
    std::cerr << "stage: reusing dataset\n";
    art.ds = expert::Dataset::load(data_dir);
  } else {
    std::cerr << "stage: generating demonstrations\n";
    art.ds = expert::generate_dataset(cfg.dataset);
    fs::create_directories(cfg.out_dir);
    art.ds.save(data_dir);
  }

  bool have_models = reuse && fs::exists(bc_path) && fs::exists(final_path);
  if (have_models) {
    std::cerr << "stage: reusing checkpoints\n";
    nn::load_checkpoint(bc_path, &art.bc.params());
    nn::load_checkpoint(final_path, &art.model.params());
    // the relabeled records are part of the reused state only when the final
    // model is; regenerate them for the classifier by rerunning collection
  } else {
    std::cerr << "stage: behavior cloning (" << cfg.train.epochs << " epochs)\n";
    nn::CbeModel<float> model(nn::ModelDims{}, cfg.train.seed);
    train::Trainer trainer(&model, cfg.train);
    for (const train::EpochStats& e : trainer.fit(art.ds))
      std::cerr << "  epoch " << e.epoch << " loss " << e.loss << "\n";
    copy_params(model, &art.bc);
    nn::save_checkpoint(bc_path, art.bc.params());

    std::cerr << "stage: relabeling rounds\n";
    int epoch = cfg.train.epochs;
    for (int it = 0; it < cfg.dagger.iterations; ++it) {
      int added = train::collect_relabeled_records(model, &art.ds, cfg.dagger, it);
      std::cerr << "  iteration " << it << ": " << added << " records\n";
      for (int e = 0; e < cfg.dagger.epochs_per_iter; ++e, ++epoch) {
        trainer.opt().set_lr(cfg.train.lr * std::pow(cfg.train.lr_decay, epoch));
        train::EpochStats st = trainer.run_epoch(art.ds, epoch);
        std::cerr << "  epoch " << st.epoch << " loss " << st.loss << "\n";
      }
    }
    copy_params(model, &art.model);
    nn::save_checkpoint(final_path, art.model.params());
  }

  if (reuse && fs::exists(clf_path)) {
    std::cerr << "stage: reusing classifier\n";
    art.clf = map::DirectionClassifier::load(clf_path);
  } else {
    std::cerr << "stage: direction classifier\n";
    map::ClassifierReport rep;
    art.clf = map::train_direction_classifier(art.ds, cfg.classifier, &rep);
    std::cerr << "  val top-8 " << rep.val_top8 << "\n";
    art.clf.save(clf_path);
  }
  return art;
}

eval::MetricsTable cached_sweep(const eval::ExperimentConfig& cfg, bool reuse,
                                const std::string& name,
                                const std::function<eval::MetricsTable()>& run) {
  std::string csv = cfg.out_dir + "/" + name + "/metrics.csv";
  if (reuse && fs::exists(csv)) {
    std::cerr << "stage: reusing " << name << " sweep\n";
    return eval::MetricsTable::read_csv(csv);
  }
  std::cerr << "stage: " << name << " sweep\n";
  eval::MetricsTable t = run();
  fs::create_directories(cfg.out_dir + "/" + name);
  t.write_csv(csv);
  return t;
}

void stage_two(const eval::ExperimentConfig& cfg, bool reuse) {
  Artifacts art = build_pipeline(cfg, reuse);

  // criterion 10 + 11 inputs
  eval::MetricsTable single = cached_sweep(cfg, reuse, "single", [&] {
    return eval::run_single_behavior_sweep(cfg, art.model,
                                           cfg.out_dir + "/single/rollouts");
  });

  {
    bool short_ok = true, monotone = true;
    std::string rates;
    const eval::MetricsRow* prev = nullptr;
    for (int b : cfg.length_buckets) {
      const eval::MetricsRow* r = find_row(single, "len" + std::to_string(b) + "/full");
      if (!r) {
        short_ok = false;
        break;
      }
      if (b <= 64 && r->rate < 0.90) short_ok = false;
      if (prev && !geq_within_ci(*prev, *r)) monotone = false;
      rates += (rates.empty() ? "" : " ") + fmt("%.2f", r->rate);
      prev = r;
    }
    record(10, "single-behavior success and length trend", short_ok && monotone,
           "full rates by bucket [" + rates + "], short buckets >= 0.90: " +
               (short_ok ? "yes" : "NO") + ", non-increasing within ci: " +
               (monotone ? "yes" : "NO"));
  }

  {
    bool ok = true;
    std::string worst = "all buckets";
    for (int b : cfg.length_buckets) {
      std::string base = "len" + std::to_string(b);
      const eval::MetricsRow* full = find_row(single, base + "/full");
      const eval::MetricsRow* na = find_row(single, base + "/no-attractor");
      const eval::MetricsRow* nz = find_row(single, base + "/no-embedding");
      if (!full || !na || !nz) {
        ok = false;
        break;
      }
      if (!geq_within_ci(*full, *na) || !geq_within_ci(*full, *nz)) {
        ok = false;
        worst = base;
      }
    }
    record(11, "ablation ordering per bucket", ok,
           std::string("full >= no-attractor and full >= no-embedding within ci: ") +
               (ok ? "every bucket" : ("violated at " + worst)));
  }

  {
    std::cerr << "stage: cloned-vs-refined comparison\n";
    int bc_wins = jittered_successes(cfg, art.bc, 48);
    int refined_wins = jittered_successes(cfg, art.model, 48);
    record(12, "relabeling improves jittered starts", refined_wins > bc_wins,
           "cloned " + std::to_string(bc_wins) + "/" + std::to_string(cfg.trials) +
               " -> refined " + std::to_string(refined_wins) + "/" +
               std::to_string(cfg.trials));
  }

  eval::MetricsTable follow = cached_sweep(cfg, reuse, "follow", [&] {
    return eval::run_path_following_sweep(cfg, art.model,
                                          cfg.out_dir + "/follow/rollouts");
  });
  {
    const eval::MetricsRow* seg = find_row(follow, "K48");
    const eval::MetricsRow* single_z = find_row(follow, "single");
    bool ok = seg && single_z && seg->rate > single_z->rate && seg->extra >= 10.0 &&
              seg->rate >= 0.80;
    record(13, "long-route following", ok,
           seg && single_z
               ? "K48 " + fmt("%.2f", seg->rate) + " vs single embedding " +
                     fmt("%.2f", single_z->rate) + ", compression " +
                     fmt("%.1f", seg->extra) + "x"
               : "rows missing");
  }

  eval::MetricsTable obstacle = cached_sweep(cfg, reuse, "obstacle", [&] {
    return eval::run_obstacle_sweep(cfg, art.model, cfg.out_dir + "/obstacle/rollouts");
  });
  {
    bool floor_ok = true, trend_ok = true;
    std::string rates;
    const eval::MetricsRow* prev = nullptr;
    for (const eval::MetricsRow& r : obstacle.rows) {
      if (r.rate < 0.60) floor_ok = false;
      if (prev && !geq_within_ci(r, *prev)) trend_ok = false;
      rates += (rates.empty() ? "" : " ") + fmt("%.2f", r.rate);
      prev = &r;
    }
    record(14, "unseen obstacle robustness", floor_ok && trend_ok,
           "rates by offset [" + rates + "], floor 0.60: " +
               (floor_ok ? "yes" : "NO") + ", non-decreasing within ci: " +
               (trend_ok ? "yes" : "NO"));
  }

  eval::MetricsTable noise = cached_sweep(cfg, reuse, "noise", [&] {
    return eval::run_noise_sweep(cfg, art.model, cfg.out_dir + "/noise/rollouts");
  });
  {
    const eval::MetricsRow* s0 = find_row(noise, "s0.0");
    const eval::MetricsRow* s5 = find_row(noise, "s0.5");
    const eval::MetricsRow* s10 = find_row(noise, "s1.0");
    bool ok = false;
    std::string detail = "rows missing";
    if (s0 && s5 && s10) {
      double d5 = s0->rate - s5->rate, d10 = s0->rate - s10->rate;
      ok = d10 >= d5 && d5 >= 0.0 && d10 <= 0.20;
      detail = "degradation " + fmt("%.3f", d5) + " at s=0.5, " + fmt("%.3f", d10) +
               " at s=1.0";
    }
    record(15, "actuation noise robustness", ok, detail);
  }

  eval::MetricsTable mapping = cached_sweep(cfg, reuse, "mapping", [&] {
    return eval::run_mapping_experiment(cfg, art.model, art.clf,
                                        cfg.out_dir + "/mapping");
  });
  {
    // pooled route success across site worlds
    int rs = 0, rt = 0;
    bool storage_ok = true;
    for (const eval::MetricsRow& r : mapping.rows) {
      if (r.condition.find("/route") != std::string::npos) {
        rs += r.successes;
        rt += r.trials;
        if (!(r.extra >= 10.0)) storage_ok = false;  // dense bytes / map bytes
      }
    }
    double route_rate = rt > 0 ? static_cast<double>(rs) / rt : 0.0;

    // choice-point vs fixed-distance connectivity, pooled per fraction
    bool dominates = true, strict_somewhere = false;
    std::string curve;
    for (double f : {0.25, 0.5, 0.75}) {
      int cs = 0, ct = 0, xs = 0, xt = 0;
      std::string tag = "/f" + fmt("%.2f", f);
      for (const eval::MetricsRow& r : mapping.rows) {
        if (r.condition.find(tag) == std::string::npos) continue;
        if (r.condition.find("/choice/") != std::string::npos) {
          cs += r.successes;
          ct += r.trials;
        } else if (r.condition.find("/fixed/") != std::string::npos) {
          xs += r.successes;
          xt += r.trials;
        }
      }
      double c = ct ? static_cast<double>(cs) / ct : 0.0;
      double x = xt ? static_cast<double>(xs) / xt : 0.0;
      if (c < x) dominates = false;
      if (c > x) strict_somewhere = true;
      curve += fmt("%.2f", c) + ">=" + fmt("%.2f", x) + " ";
    }
    bool ok = route_rate >= 0.80 && storage_ok && dominates && strict_somewhere;
    record(16, "topological mapping", ok,
           "route success " + fmt("%.2f", route_rate) + " (" + std::to_string(rs) +
               "/" + std::to_string(rt) + "), storage ratio >= 10x: " +
               (storage_ok ? "yes" : "NO") + ", connectivity " + curve +
               (dominates && strict_somewhere ? "(dominates)" : "(NO dominance)"));
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::string out = "acceptance_out";
  bool reuse = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--reuse") == 0) reuse = true;
    else if (std::strcmp(argv[i], "--out") == 0 && i + 1 < argc) out = argv[++i];
  }

  eval::ExperimentConfig cfg = eval::parse_config("{}");
  cfg.out_dir = out;
  fs::create_directories(out);

  nn::CbeModel<float> probe(nn::ModelDims{}, 7);  // untrained, for structure checks

  std::cerr << "stage: exact property criteria\n";
  check_labels([&] {
    // a small dataset is enough for the label properties; the big one is
    // checked implicitly by training on it
    expert::DatasetConfig dc = cfg.dataset;
    dc.world_seeds = {cfg.train_seeds[0], cfg.train_seeds[1]};
    dc.demos_per_world = 40;
    return expert::generate_dataset(dc);
  }());
  check_gradients();
  check_noise_model();
  check_dijkstra();
  check_circular_variance();
  check_segmentation(probe);
  check_composition_and_map_io(probe, out);
  check_serialization(probe, out);

  try {
    stage_two(cfg, reuse);
  } catch (const std::exception& e) {
    std::cerr << "pipeline error: " << e.what() << "\n";
    for (int id = 10; id <= 16; ++id) {
      bool have = false;
      for (const Criterion& c : g_results)
        if (c.id == id) have = true;
      if (!have) record(id, "pipeline stage", false, std::string("aborted: ") + e.what());
    }
  }

  std::sort(g_results.begin(), g_results.end(),
            [](const Criterion& a, const Criterion& b) { return a.id < b.id; });
  int failures = 0;
  std::cout << "\n";
  for (const Criterion& c : g_results) {
    std::printf("criterion %2d %s  %s (%s)\n", c.id, c.pass ? "PASS" : "FAIL",
                c.name.c_str(), c.detail.c_str());
    if (!c.pass) ++failures;
  }
  std::printf("acceptance: %d/16 criteria passed\n",
              static_cast<int>(g_results.size()) - failures);
  return failures;
}
