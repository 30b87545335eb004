#include "bnav/eval/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "bnav/eval/pca.hpp"
#include "bnav/expert/labels.hpp"
#include "bnav/expert/planner.hpp"
#include "bnav/sim/obstacle.hpp"
#include "bnav/threading.hpp"

namespace bnav::eval {
namespace {

// average expert progress per 10 Hz step, used to aim endpoint sampling
constexpr double kMetersPerStep = 0.085;

constexpr uint64_t kSingleTag = 0x51;
constexpr uint64_t kObstacleTag = 0x0b5;
constexpr uint64_t kNoiseTag = 0x401;
constexpr uint64_t kFollowTag = 0xf01;
constexpr uint64_t kMapTag = 0x3ae;
constexpr uint64_t kManifoldTag = 0x3a1f;

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

std::string file_safe(std::string s) {
  for (char& c : s)
    if (c == '/' || c == ' ') c = '_';
  return s;
}

MetricsRow make_row(std::string cond, const std::vector<uint8_t>& succ,
                    const std::vector<int>& steps) {
  MetricsRow r;
  r.condition = std::move(cond);
  r.trials = static_cast<int>(succ.size());
  r.successes = static_cast<int>(std::count(succ.begin(), succ.end(), uint8_t(1)));
  Interval iv = wilson95(r.successes, r.trials);
  r.rate = success_fraction(r.successes, r.trials);
  r.ci_lo = iv.lo;
  r.ci_hi = iv.hi;
  if (!steps.empty())
    r.mean_steps = std::accumulate(steps.begin(), steps.end(), 0.0) /
                   static_cast<double>(steps.size());
  return r;
}

std::vector<sim::World> make_worlds(const std::vector<uint64_t>& seeds,
                                    const sim::WorldSpec& spec) {
  std::vector<sim::World> out;
  out.reserve(seeds.size());
  for (uint64_t s : seeds) out.push_back(sim::World::generate(s, spec));
  return out;
}

double deg2rad(double d) { return d * M_PI / 180.0; }

// obstacle placement rarely rejects (start/goal cover); keep drawing
sim::World obstacle_world(const sim::World& world, const std::vector<Pose>& path,
                          double offset, Rng& rng) {
  for (int tries = 0; tries < 200; ++tries) {
    try {
      return sim::place_obstacle(world, path, offset, rng);
    } catch (const PlacementError&) {
    }
  }
  throw PlacementError("could not place an obstacle beside the path");
}

}  // namespace

EvalBehavior sample_eval_behavior(const sim::World& world,
                                  const nn::CbeModel<float>& model,
                                  int target_steps, const ExperimentConfig& cfg,
                                  Rng& rng) {
  if (target_steps < 4) throw DatasetError("eval behavior target too short");
  const double d_c = kMetersPerStep * target_steps;
  const double diag = std::hypot(world.width_m(), world.height_m());
  expert::FollowParams fp = cfg.dataset.follow;
  fp.noise_scale = cfg.dataset.demo_noise;

  for (int attempt = 0; attempt < 150; ++attempt) {
    double widen = 1.0 + 0.15 * (attempt / 30);  // relax every 30 tries
    double d_lo = std::max(0.8, 0.55 * d_c / widen);
    double d_hi = std::min(0.85 * diag, 1.15 * d_c * widen);
    if (d_hi <= d_lo) d_hi = d_lo + 0.5;

    Vec2 s, g;
    try {
      std::tie(s, g) = expert::sample_endpoint_pair(world, rng, d_lo, d_hi);
    } catch (const DatasetError&) {
      continue;
    }
    expert::PlanResult plan;
    try {
      plan = expert::plan_path(world, s, g);
    } catch (const NoPathError&) {
      continue;
    }
    if (plan.length < 0.70 * d_c / widen || plan.length > 1.35 * d_c * widen)
      continue;

    Pose start{s.x, s.y,
               expert::initial_heading(plan, rng,
                                       deg2rad(cfg.dataset.heading_jitter_deg))};
    expert::Demo demo;
    try {
      demo = expert::follow_plan(world, plan, start, rng, fp);
    } catch (const ControllerTimeoutError&) {
      continue;
    } catch (const CollisionError&) {
      continue;
    }
    int steps = static_cast<int>(demo.steps.size());
    if (steps < std::max(4.0, 0.75 * target_steps / widen) ||
        steps > 1.30 * target_steps * widen)
      continue;

    std::vector<expert::KeptFrame> kept = expert::subsample_demo(demo, rng, 0);
    if (kept.size() < 2) continue;

    EvalBehavior b;
    std::vector<sim::Observation> frames;
    frames.reserve(kept.size());
    for (const auto& k : kept) frames.push_back(k.obs);
    b.z = model.encode_demo(frames);
    b.A_start = model.obs_features(kept.front().obs);
    b.A_goal = model.obs_features(kept.back().obs);
    b.exec_start = expert::jitter_pose(world, kept.front().pose, rng,
                                       cfg.dataset.jitter_xy,
                                       deg2rad(cfg.dataset.jitter_theta_deg));
    b.goal = kept.back().pose.position();
    b.demo_steps = steps;
    b.demo_len = kept.back().cum_len;
    for (size_t k = 0; k + 1 < demo.steps.size(); ++k)
      b.net_turn += wrap_angle(demo.steps[k + 1].pose.theta -
                               demo.steps[k].pose.theta);
    b.demo_poses.reserve(demo.steps.size());
    for (const auto& st : demo.steps) b.demo_poses.push_back(st.pose);
    b.kept = std::move(kept);
    return b;
  }
  throw DatasetError("could not sample a ~" + std::to_string(target_steps) +
                     "-step demonstration");
}

TrialResult run_behavior_trial(const sim::World& world,
                               const nn::CbeModel<float>& model,
                               const EvalBehavior& behavior,
                               const exec::ExecParams& params,
                               double success_radius, Rng& rng) {
  int budget = std::max(
      20, static_cast<int>(std::lround(params.budget_factor * behavior.demo_steps)));
  exec::BehaviorResult res =
      exec::execute_behavior(world, model, behavior.z, behavior.A_start,
                             behavior.A_goal, behavior.exec_start, budget,
                             params, rng);
  TrialResult out;
  out.steps = res.steps;
  out.status = res.status;
  out.dist = std::hypot(res.final_pose.x - behavior.goal.x,
                        res.final_pose.y - behavior.goal.y);
  out.success = res.status != exec::SegmentStatus::Crashed &&
                out.dist <= success_radius;
  return out;
}

namespace {

// shared shape of the three behavior sweeps: trials x variants where every
// variant replays the same sampled behavior
struct SweepGrid {
  std::vector<std::vector<uint8_t>> succ;  // [variant][trial]
  std::vector<std::vector<int>> steps;
};

SweepGrid make_grid(int variants, int trials) {
  SweepGrid g;
  g.succ.assign(static_cast<size_t>(variants),
                std::vector<uint8_t>(static_cast<size_t>(trials), 0));
  g.steps.assign(static_cast<size_t>(variants),
                 std::vector<int>(static_cast<size_t>(trials), 0));
  return g;
}

void write_trace(const std::string& artifact_dir, const std::string& cond,
                 const std::vector<exec::TraceRow>& rows) {
  if (artifact_dir.empty()) return;
  std::filesystem::create_directories(artifact_dir);
  exec::write_trace_csv(artifact_dir + "/" + file_safe(cond) + ".csv", rows);
}

}  // namespace

MetricsTable run_single_behavior_sweep(const ExperimentConfig& cfg,
                                       const nn::CbeModel<float>& model,
                                       const std::string& artifact_dir) {
  const std::vector<sim::World> worlds = make_worlds(cfg.heldout_seeds, cfg.eval_world);
  const uint64_t sweep = mix64(cfg.master_seed, kSingleTag);
  const int B = static_cast<int>(cfg.length_buckets.size());
  const int T = cfg.trials;
  const char* names[] = {"full", "no-attractor", "no-embedding"};

  std::vector<SweepGrid> grids(static_cast<size_t>(B));
  for (auto& g : grids) g = make_grid(3, T);

  parallel_for(static_cast<int64_t>(B) * T, [&](int64_t item) {
    int b = static_cast<int>(item / T);
    int t = static_cast<int>(item % T);
    const sim::World& w = worlds[static_cast<size_t>(t) % worlds.size()];
    Rng rng(mix64(sweep, static_cast<uint64_t>(item) + 1));
    EvalBehavior beh =
        sample_eval_behavior(w, model, cfg.length_buckets[static_cast<size_t>(b)],
                             cfg, rng);
    for (int v = 0; v < 3; ++v) {
      exec::ExecParams p = cfg.exec_params;
      p.zero_relation = v == 1;
      p.zero_embedding = v == 2;
      Rng er = rng.fork(0xe0 + static_cast<uint64_t>(v));
      TrialResult res = run_behavior_trial(w, model, beh, p, cfg.success_radius, er);
      grids[static_cast<size_t>(b)].succ[static_cast<size_t>(v)][static_cast<size_t>(t)] =
          res.success ? 1 : 0;
      grids[static_cast<size_t>(b)].steps[static_cast<size_t>(v)][static_cast<size_t>(t)] =
          res.steps;
    }
  });

  MetricsTable table;
  table.title = "single-behavior success by source length";
  table.extra_name = "target_steps";
  for (int b = 0; b < B; ++b) {
    int bucket = cfg.length_buckets[static_cast<size_t>(b)];
    for (int v = 0; v < 3; ++v) {
      MetricsRow r = make_row("len" + std::to_string(bucket) + "/" + names[v],
                              grids[static_cast<size_t>(b)].succ[static_cast<size_t>(v)],
                              grids[static_cast<size_t>(b)].steps[static_cast<size_t>(v)]);
      r.extra = bucket;
      table.rows.push_back(std::move(r));
    }
  }

  if (!artifact_dir.empty() && T > 0) {  // one example rollout per bucket
    for (int b = 0; b < B; ++b) {
      int bucket = cfg.length_buckets[static_cast<size_t>(b)];
      const sim::World& w = worlds.front();
      Rng rng(mix64(sweep, static_cast<uint64_t>(b) * T + 1));
      EvalBehavior beh = sample_eval_behavior(w, model, bucket, cfg, rng);
      Rng er = rng.fork(0xe0);
      std::vector<exec::TraceRow> trace;
      int budget = std::max(20, static_cast<int>(std::lround(
                                    cfg.exec_params.budget_factor * beh.demo_steps)));
      exec::execute_behavior(w, model, beh.z, beh.A_start, beh.A_goal,
                             beh.exec_start, budget, cfg.exec_params, er, nullptr,
                             &trace);
      write_trace(artifact_dir, "len" + std::to_string(bucket), trace);
    }
  }
  return table;
}

MetricsTable run_obstacle_sweep(const ExperimentConfig& cfg,
                                const nn::CbeModel<float>& model,
                                const std::string& artifact_dir) {
  const std::vector<sim::World> worlds = make_worlds(cfg.heldout_seeds, cfg.eval_world);
  const uint64_t sweep = mix64(cfg.master_seed, kObstacleTag);
  const int C = static_cast<int>(cfg.obstacle_offsets.size());
  const int T = cfg.trials;
  SweepGrid grid = make_grid(C, T);

  parallel_for(T, [&](int64_t t) {
    const sim::World& w = worlds[static_cast<size_t>(t) % worlds.size()];
    Rng rng(mix64(sweep, static_cast<uint64_t>(t) + 1));
    // the behavior is encoded in the clean world; the obstacle appears later
    EvalBehavior beh = sample_eval_behavior(w, model, cfg.robustness_steps, cfg, rng);
    for (int c = 0; c < C; ++c) {
      Rng pr = rng.fork(0x0b + static_cast<uint64_t>(c));
      sim::World wobs = obstacle_world(w, beh.demo_poses,
                                       cfg.obstacle_offsets[static_cast<size_t>(c)], pr);
      Rng er = rng.fork(0xe0 + static_cast<uint64_t>(c));
      TrialResult res =
          run_behavior_trial(wobs, model, beh, cfg.exec_params, cfg.success_radius, er);
      grid.succ[static_cast<size_t>(c)][static_cast<size_t>(t)] = res.success ? 1 : 0;
      grid.steps[static_cast<size_t>(c)][static_cast<size_t>(t)] = res.steps;
    }
  });

  MetricsTable table;
  table.title = "unseen obstacle robustness";
  table.extra_name = "offset_m";
  for (int c = 0; c < C; ++c) {
    double off = cfg.obstacle_offsets[static_cast<size_t>(c)];
    MetricsRow r = make_row(fmt("off%.3f", off), grid.succ[static_cast<size_t>(c)],
                            grid.steps[static_cast<size_t>(c)]);
    r.extra = off;
    table.rows.push_back(std::move(r));
  }

  if (!artifact_dir.empty() && T > 0) {
    const sim::World& w = worlds.front();
    Rng rng(mix64(sweep, 1));
    EvalBehavior beh = sample_eval_behavior(w, model, cfg.robustness_steps, cfg, rng);
    for (int c = 0; c < C; ++c) {
      Rng pr = rng.fork(0x0b + static_cast<uint64_t>(c));
      sim::World wobs = obstacle_world(w, beh.demo_poses,
                                       cfg.obstacle_offsets[static_cast<size_t>(c)], pr);
      Rng er = rng.fork(0xe0 + static_cast<uint64_t>(c));
      std::vector<exec::TraceRow> trace;
      int budget = std::max(20, static_cast<int>(std::lround(
                                    cfg.exec_params.budget_factor * beh.demo_steps)));
      exec::execute_behavior(wobs, model, beh.z, beh.A_start, beh.A_goal,
                             beh.exec_start, budget, cfg.exec_params, er, nullptr,
                             &trace);
      write_trace(artifact_dir,
                  fmt("off%.3f", cfg.obstacle_offsets[static_cast<size_t>(c)]), trace);
    }
  }
  return table;
}

MetricsTable run_noise_sweep(const ExperimentConfig& cfg,
                             const nn::CbeModel<float>& model,
                             const std::string& artifact_dir) {
  const std::vector<sim::World> worlds = make_worlds(cfg.heldout_seeds, cfg.eval_world);
  const uint64_t sweep = mix64(cfg.master_seed, kNoiseTag);
  const int C = static_cast<int>(cfg.noise_scales.size());
  const int T = cfg.trials;
  SweepGrid grid = make_grid(C, T);

  parallel_for(T, [&](int64_t t) {
    const sim::World& w = worlds[static_cast<size_t>(t) % worlds.size()];
    Rng rng(mix64(sweep, static_cast<uint64_t>(t) + 1));
    EvalBehavior beh = sample_eval_behavior(w, model, cfg.robustness_steps, cfg, rng);
    for (int c = 0; c < C; ++c) {
      exec::ExecParams p = cfg.exec_params;
      p.noise_scale = cfg.noise_scales[static_cast<size_t>(c)];
      Rng er = rng.fork(0xe0 + static_cast<uint64_t>(c));
      TrialResult res = run_behavior_trial(w, model, beh, p, cfg.success_radius, er);
      grid.succ[static_cast<size_t>(c)][static_cast<size_t>(t)] = res.success ? 1 : 0;
      grid.steps[static_cast<size_t>(c)][static_cast<size_t>(t)] = res.steps;
    }
  });

  MetricsTable table;
  table.title = "actuation-noise robustness";
  table.extra_name = "degradation";
  std::vector<MetricsRow> rows;
  for (int c = 0; c < C; ++c)
    rows.push_back(make_row(fmt("s%.1f", cfg.noise_scales[static_cast<size_t>(c)]),
                            grid.succ[static_cast<size_t>(c)],
                            grid.steps[static_cast<size_t>(c)]));
  for (int c = 0; c < C; ++c) {
    rows[static_cast<size_t>(c)].extra = rows.front().rate - rows[static_cast<size_t>(c)].rate;
    table.rows.push_back(rows[static_cast<size_t>(c)]);
  }

  if (!artifact_dir.empty() && T > 0) {
    const sim::World& w = worlds.front();
    Rng rng(mix64(sweep, 1));
    EvalBehavior beh = sample_eval_behavior(w, model, cfg.robustness_steps, cfg, rng);
    for (int c = 0; c < C; ++c) {
      exec::ExecParams p = cfg.exec_params;
      p.noise_scale = cfg.noise_scales[static_cast<size_t>(c)];
      Rng er = rng.fork(0xe0 + static_cast<uint64_t>(c));
      std::vector<exec::TraceRow> trace;
      int budget = std::max(20, static_cast<int>(std::lround(
                                    p.budget_factor * beh.demo_steps)));
      exec::execute_behavior(w, model, beh.z, beh.A_start, beh.A_goal,
                             beh.exec_start, budget, p, er, nullptr, &trace);
      write_trace(artifact_dir,
                  fmt("s%.1f", cfg.noise_scales[static_cast<size_t>(c)]), trace);
    }
  }
  return table;
}

namespace {

struct FollowOut {
  uint8_t succ = 0;
  int steps = 0;
  double compression = 0.0;
  double bytes = 0.0;
};

FollowOut follow_trial(const sim::World& world, const nn::CbeModel<float>& model,
                       const EvalBehavior& beh, const exec::BehaviorMemory& mem,
                       const exec::ExecParams& params, double radius, Rng& rng) {
  exec::SequenceResult res =
      exec::execute_sequence(world, model, mem, beh.exec_start, params, rng);
  bool crashed = std::any_of(res.statuses.begin(), res.statuses.end(),
                             [](exec::SegmentStatus s) {
                               return s == exec::SegmentStatus::Crashed;
                             });
  double dist = std::hypot(res.final_pose.x - beh.goal.x,
                           res.final_pose.y - beh.goal.y);
  FollowOut out;
  out.succ = (!crashed && dist <= radius) ? 1 : 0;
  out.steps = res.total_steps;
  out.compression = static_cast<double>(beh.demo_steps) /
                    static_cast<double>(mem.count());
  out.bytes = static_cast<double>(mem.bytes());
  return out;
}

}  // namespace

MetricsTable run_path_following_sweep(const ExperimentConfig& cfg,
                                      const nn::CbeModel<float>& model,
                                      const std::string& artifact_dir) {
  const std::vector<sim::World> worlds =
      make_worlds(cfg.heldout_seeds, cfg.follow_world);
  const uint64_t sweep = mix64(cfg.master_seed, kFollowTag);
  const int nK = static_cast<int>(cfg.follow_segment_frames.size());
  const int T = cfg.follow_trials;
  const int C = 2 * nK + 1;  // per-K full + no-attractor, then single

  std::vector<std::vector<FollowOut>> out(
      static_cast<size_t>(C), std::vector<FollowOut>(static_cast<size_t>(T)));

  parallel_for(T, [&](int64_t t) {
    const sim::World& w = worlds[static_cast<size_t>(t) % worlds.size()];
    Rng rng(mix64(sweep, static_cast<uint64_t>(t) + 1));
    EvalBehavior beh = sample_eval_behavior(w, model, cfg.follow_steps, cfg, rng);
    for (int ki = 0; ki < nK; ++ki) {
      int K = cfg.follow_segment_frames[static_cast<size_t>(ki)];
      exec::BehaviorMemory mem = exec::build_memory(model, beh.kept, K);
      Rng er = rng.fork(0xa0 + static_cast<uint64_t>(ki));
      out[static_cast<size_t>(ki)][static_cast<size_t>(t)] =
          follow_trial(w, model, beh, mem, cfg.exec_params, cfg.success_radius, er);
      exec::ExecParams na = cfg.exec_params;
      na.zero_relation = true;
      Rng er2 = rng.fork(0xb0 + static_cast<uint64_t>(ki));
      out[static_cast<size_t>(nK + ki)][static_cast<size_t>(t)] =
          follow_trial(w, model, beh, mem, na, cfg.success_radius, er2);
    }
    // whole demonstration as one behavior
    exec::BehaviorMemory one =
        exec::build_memory(model, beh.kept, static_cast<int>(beh.kept.size()));
    Rng er = rng.fork(0xc0);
    out[static_cast<size_t>(2 * nK)][static_cast<size_t>(t)] =
        follow_trial(w, model, beh, one, cfg.exec_params, cfg.success_radius, er);
  });

  MetricsTable table;
  table.title = "long-route following by segment length";
  table.extra_name = "compression";
  auto push = [&](const std::string& cond, int c) {
    std::vector<uint8_t> succ(static_cast<size_t>(T));
    std::vector<int> steps(static_cast<size_t>(T));
    double comp = 0.0, bytes = 0.0;
    for (int t = 0; t < T; ++t) {
      const FollowOut& f = out[static_cast<size_t>(c)][static_cast<size_t>(t)];
      succ[static_cast<size_t>(t)] = f.succ;
      steps[static_cast<size_t>(t)] = f.steps;
      comp += f.compression;
      bytes += f.bytes;
    }
    MetricsRow r = make_row(cond, succ, steps);
    r.extra = comp / std::max(1, T);
    r.memory_bytes = bytes / std::max(1, T);
    table.rows.push_back(std::move(r));
  };
  for (int ki = 0; ki < nK; ++ki)
    push("K" + std::to_string(cfg.follow_segment_frames[static_cast<size_t>(ki)]), ki);
  for (int ki = 0; ki < nK; ++ki)
    push("K" + std::to_string(cfg.follow_segment_frames[static_cast<size_t>(ki)]) +
             "/no-attractor",
         nK + ki);
  push("single", 2 * nK);

  if (!artifact_dir.empty() && T > 0 && nK > 0) {
    const sim::World& w = worlds.front();
    Rng rng(mix64(sweep, 1));
    EvalBehavior beh = sample_eval_behavior(w, model, cfg.follow_steps, cfg, rng);
    int K = cfg.follow_segment_frames[0];
    exec::BehaviorMemory mem = exec::build_memory(model, beh.kept, K);
    Rng er = rng.fork(0xa0);
    std::vector<exec::TraceRow> trace;
    exec::execute_sequence(w, model, mem, beh.exec_start, cfg.exec_params, er, &trace);
    write_trace(artifact_dir, "follow_K" + std::to_string(K), trace);
  }
  return table;
}

// ---------------------------------------------------------------------------
// mapping experiment

namespace {

// Rotate in place (at most omega_max per step) until the heading matches the
// site's canonical departure heading. With a forward-facing sensor this is
// what makes arrival frames linkable to the next departure's frames.
void append_turn_in_place(const sim::World& world, expert::Demo* demo,
                          double target_theta, const sim::MotionLimits& limits) {
  Pose p = demo->steps.back().pose;
  double delta = wrap_angle(target_theta - p.theta);
  double step = limits.omega_max * sim::kDt;
  int n = static_cast<int>(std::ceil(std::abs(delta) / step));
  for (int k = 0; k < n; ++k) {
    double d = std::clamp(delta, -step, step);
    p.theta = wrap_angle(p.theta + d);
    delta -= d;
    expert::DemoStep s;
    s.pose = p;
    s.obs = sim::render(world, p);
    s.v = 0.0f;
    s.omega = static_cast<float>(d / sim::kDt);
    demo->steps.push_back(std::move(s));
  }
}

struct SiteDemos {
  std::vector<std::vector<expert::KeptFrame>> kept;  // one per ordered pair
  std::vector<int> from, to;
  std::vector<int> steps;
  size_t dense_bytes = 0;  // raw observation storage of every source frame
};

SiteDemos collect_site_demos(const sim::SiteWorld& sw, const ExperimentConfig& cfg,
                             uint64_t seed) {
  const int n = static_cast<int>(sw.sites.size());
  const int P = n * (n - 1);
  SiteDemos out;
  out.kept.resize(static_cast<size_t>(P));
  out.from.resize(static_cast<size_t>(P));
  out.to.resize(static_cast<size_t>(P));
  out.steps.resize(static_cast<size_t>(P));

  parallel_for(P, [&](int64_t p) {
    int i = static_cast<int>(p) / (n - 1);
    int rest = static_cast<int>(p) % (n - 1);
    int j = rest < i ? rest : rest + 1;
    out.from[static_cast<size_t>(p)] = i;
    out.to[static_cast<size_t>(p)] = j;

    expert::FollowParams fp = cfg.dataset.follow;
    fp.noise_scale = cfg.dataset.demo_noise;
    Rng rng(mix64(seed, static_cast<uint64_t>(p) + 1));
    expert::PlanResult plan = expert::plan_path(
        sw.world, sw.sites[static_cast<size_t>(i)].departure.position(),
        sw.sites[static_cast<size_t>(j)].arrival.position());
    expert::Demo demo;
    bool ok = false;
    for (int tries = 0; tries < 8 && !ok; ++tries) {
      try {
        demo = expert::follow_plan(sw.world, plan,
                                   sw.sites[static_cast<size_t>(i)].departure, rng, fp);
        ok = true;
      } catch (const ControllerTimeoutError&) {
      } catch (const CollisionError&) {
      }
    }
    if (!ok)
      throw DatasetError("site demo failed: " + std::to_string(i) + " -> " +
                         std::to_string(j));
    append_turn_in_place(sw.world, &demo,
                         sw.sites[static_cast<size_t>(j)].departure.theta, fp.limits);
    out.steps[static_cast<size_t>(p)] = static_cast<int>(demo.steps.size());
    out.kept[static_cast<size_t>(p)] = expert::subsample_demo(demo, rng, 0);
  });

  for (int s : out.steps)
    out.dense_bytes += static_cast<size_t>(s) * 2 * sim::kNumRays * sizeof(float);
  return out;
}

std::vector<std::vector<expert::KeptFrame>> demo_subset(
    const SiteDemos& demos, const std::vector<int>& picks) {
  std::vector<std::vector<expert::KeptFrame>> out;
  out.reserve(picks.size());
  for (int p : picks) out.push_back(demos.kept[static_cast<size_t>(p)]);
  return out;
}

size_t map_file_bytes(const map::TopoMap& m, const std::string& path) {
  map::save_map(path, m);
  size_t bytes = static_cast<size_t>(std::filesystem::file_size(path));
  return bytes;
}

}  // namespace

MetricsTable run_mapping_experiment(const ExperimentConfig& cfg,
                                    const nn::CbeModel<float>& model,
                                    const map::DirectionClassifier& clf,
                                    const std::string& artifact_dir) {
  const uint64_t sweep = mix64(cfg.master_seed, kMapTag);
  MetricsTable table;
  table.title = "topological mapping";
  table.extra_name = "value";

  std::string detail_path;
  std::ofstream detail;
  if (!artifact_dir.empty()) {
    std::filesystem::create_directories(artifact_dir);
    detail_path = artifact_dir + "/mapping_details.csv";
    detail.open(detail_path);
    detail << "world,variant,fraction,draw,vertices,behavioral,proximal,"
              "map_bytes,dense_bytes,connectivity\n";
  }

  for (uint64_t wseed : cfg.mapping_seeds) {
    sim::SiteWorldSpec sspec = cfg.site_world;
    sspec.sites = cfg.map_locations;
    sim::SiteWorld sw = sim::generate_site_world(wseed, sspec);
    const int n = static_cast<int>(sw.sites.size());
    const int P = n * (n - 1);
    const uint64_t wtag = mix64(sweep, wseed);

    SiteDemos demos = collect_site_demos(sw, cfg, mix64(wtag, 0xde30));

    // --- full map with choice points: route execution over all pairs ---
    map::MapParams mp = cfg.map_params;
    mp.use_choice_points = true;
    std::vector<int> all(static_cast<size_t>(P));
    std::iota(all.begin(), all.end(), 0);
    map::TopoMap full = map::build_map(model, &clf, demo_subset(demos, all), mp);

    std::string map_path = artifact_dir.empty()
                               ? (std::filesystem::temp_directory_path() /
                                  ("bnav_map_" + std::to_string(wseed) + ".map"))
                                     .string()
                               : artifact_dir + "/map_w" + std::to_string(wseed) +
                                     ".map";
    size_t map_bytes = map_file_bytes(full, map_path);
    if (artifact_dir.empty()) std::filesystem::remove(map_path);

    int nb = 0, np = 0;
    for (const auto& e : full.edges)
      (e.type == map::EdgeType::Behavioral ? nb : np) += 1;

    std::vector<uint8_t> succ(static_cast<size_t>(P), 0);
    std::vector<int> steps(static_cast<size_t>(P), 0);
    double radius = cfg.success_radius + cfg.dataset.follow.eps_goal;
    parallel_for(P, [&](int64_t p) {
      int i = demos.from[static_cast<size_t>(p)];
      int j = demos.to[static_cast<size_t>(p)];
      const Pose& start = sw.sites[static_cast<size_t>(i)].departure;
      Vec2 center = sw.sites[static_cast<size_t>(j)].departure.position();
      Rng er(mix64(wtag, 0x907e + static_cast<uint64_t>(p)));
      try {
        map::RoutePlan route = map::plan_route(
            full, model, sim::render(sw.world, start),
            sim::render(sw.world, sw.sites[static_cast<size_t>(j)].departure));
        exec::SequenceResult res =
            map::execute_route(sw.world, model, route, start, cfg.exec_params, er);
        bool crashed = std::any_of(res.statuses.begin(), res.statuses.end(),
                                   [](exec::SegmentStatus s) {
                                     return s == exec::SegmentStatus::Crashed;
                                   });
        double dist = std::hypot(res.final_pose.x - center.x,
                                 res.final_pose.y - center.y);
        succ[static_cast<size_t>(p)] = (!crashed && dist <= radius) ? 1 : 0;
        steps[static_cast<size_t>(p)] = res.total_steps;
      } catch (const LocalizationReject&) {
      } catch (const NoRouteError&) {
      }
    });

    MetricsRow route_row = make_row("w" + std::to_string(wseed) + "/route", succ, steps);
    route_row.memory_bytes = static_cast<double>(map_bytes);
    route_row.extra = static_cast<double>(demos.dense_bytes) /
                      static_cast<double>(map_bytes);
    table.rows.push_back(std::move(route_row));
    if (detail.is_open())
      detail << wseed << ",route,1,0," << full.vertices.size() << ',' << nb << ','
             << np << ',' << map_bytes << ',' << demos.dense_bytes << ",\n";

    // --- connectivity at demo fractions, choice points vs fixed distance ---
    std::vector<Pose> locations;
    for (const auto& site : sw.sites) locations.push_back(site.departure);

    for (double frac : cfg.demo_fractions) {
      int want = std::max(1, static_cast<int>(std::lround(frac * P)));
      want = std::min(want, P);
      int draws = want == P ? 1 : cfg.conn_draws;
      for (int variant = 0; variant < 2; ++variant) {
        bool choice = variant == 0;
        int hits = 0;
        for (int d = 0; d < draws; ++d) {
          std::vector<int> picks(static_cast<size_t>(P));
          std::iota(picks.begin(), picks.end(), 0);
          Rng sr(mix64(wtag, 0x5e7 + static_cast<uint64_t>(d)));
          for (int k = P - 1; k > 0; --k)
            std::swap(picks[static_cast<size_t>(k)],
                      picks[static_cast<size_t>(sr.uniform_int(k + 1))]);
          picks.resize(static_cast<size_t>(want));
          std::sort(picks.begin(), picks.end());

          map::MapParams vp = cfg.map_params;
          vp.use_choice_points = choice;
          map::TopoMap m = map::build_map(model, choice ? &clf : nullptr,
                                          demo_subset(demos, picks), vp);
          double conn = map::connectivity_metric(m, model, sw.world, locations);
          hits += static_cast<int>(std::lround(conn * n * (n - 1)));
          if (detail.is_open()) {
            int vb = 0, vpx = 0;
            for (const auto& e : m.edges)
              (e.type == map::EdgeType::Behavioral ? vb : vpx) += 1;
            detail << wseed << ',' << (choice ? "choice" : "fixed") << ',' << frac
                   << ',' << d << ',' << m.vertices.size() << ',' << vb << ','
                   << vpx << ",,," << conn << "\n";
          }
        }
        MetricsRow r;
        r.condition = "w" + std::to_string(wseed) + "/conn/" +
                      (choice ? "choice" : "fixed") + "/" + fmt("f%.2f", frac);
        r.trials = draws * n * (n - 1);
        r.successes = hits;
        Interval iv = wilson95(r.successes, r.trials);
        r.rate = success_fraction(r.successes, r.trials);
        r.ci_lo = iv.lo;
        r.ci_hi = iv.hi;
        r.extra = frac;
        table.rows.push_back(std::move(r));
      }
    }
  }
  if (detail.is_open() && !detail) throw IoError("mapping detail write failed");
  return table;
}

SiteMapBundle build_site_map(const ExperimentConfig& cfg,
                             const nn::CbeModel<float>& model,
                             const map::DirectionClassifier& clf,
                             uint64_t world_seed) {
  sim::SiteWorldSpec sspec = cfg.site_world;
  sspec.sites = cfg.map_locations;
  SiteMapBundle out;
  out.site_world = sim::generate_site_world(world_seed, sspec);
  const uint64_t wtag = mix64(mix64(cfg.master_seed, kMapTag), world_seed);
  SiteDemos demos = collect_site_demos(out.site_world, cfg, mix64(wtag, 0xde30));
  out.demos = static_cast<int>(demos.kept.size());
  out.dense_bytes = demos.dense_bytes;
  map::MapParams mp = cfg.map_params;
  mp.use_choice_points = true;
  out.map = map::build_map(model, &clf, demos.kept, mp);
  return out;
}

void export_manifold(const ExperimentConfig& cfg, const nn::CbeModel<float>& model,
                     const std::string& csv_path) {
  if (cfg.manifold_samples < 100)
    throw DatasetError("manifold export needs at least 100 embeddings");
  const std::vector<sim::World> worlds = make_worlds(cfg.heldout_seeds, cfg.eval_world);
  const uint64_t sweep = mix64(cfg.master_seed, kManifoldTag);
  const int M = cfg.manifold_samples;

  std::vector<std::vector<float>> zs(static_cast<size_t>(M));
  std::vector<double> turn(static_cast<size_t>(M)), len(static_cast<size_t>(M));
  std::vector<int> steps(static_cast<size_t>(M)), target(static_cast<size_t>(M));

  parallel_for(M, [&](int64_t m) {
    const sim::World& w = worlds[static_cast<size_t>(m) % worlds.size()];
    int tgt = cfg.length_buckets[static_cast<size_t>(m) % cfg.length_buckets.size()];
    Rng rng(mix64(sweep, static_cast<uint64_t>(m) + 1));
    EvalBehavior beh = sample_eval_behavior(w, model, tgt, cfg, rng);
    zs[static_cast<size_t>(m)] = beh.z;
    turn[static_cast<size_t>(m)] = beh.net_turn;
    len[static_cast<size_t>(m)] = beh.demo_len;
    steps[static_cast<size_t>(m)] = beh.demo_steps;
    target[static_cast<size_t>(m)] = tgt;
  });

  std::vector<std::array<double, 2>> pts = pca2d(zs);
  std::ofstream os(csv_path);
  if (!os) throw IoError("cannot open manifold csv for write: " + csv_path);
  os << "x,y,net_turn_rad,length_m,source_steps,target_steps\n";
  os.precision(17);
  for (int m = 0; m < M; ++m)
    os << pts[static_cast<size_t>(m)][0] << ',' << pts[static_cast<size_t>(m)][1]
       << ',' << turn[static_cast<size_t>(m)] << ',' << len[static_cast<size_t>(m)]
       << ',' << steps[static_cast<size_t>(m)] << ',' << target[static_cast<size_t>(m)]
       << '\n';
  if (!os) throw IoError("manifold csv write failed: " + csv_path);
}

}  // namespace bnav::eval
