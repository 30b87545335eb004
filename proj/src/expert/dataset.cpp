#include "bnav/expert/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "bnav/binio.hpp"
#include "bnav/common.hpp"
#include "bnav/sim/sensor.hpp"
#include "bnav/threading.hpp"

namespace bnav::expert {

namespace fs = std::filesystem;
using nlohmann::json;

std::pair<Vec2, Vec2> sample_endpoint_pair(const sim::World& world, Rng& rng,
                                           double min_dist, double max_dist) {
  for (int t = 0; t < 4000; ++t) {
    Vec2 a{rng.uniform(0.3, world.width_m() - 0.3),
           rng.uniform(0.3, world.height_m() - 0.3)};
    Vec2 b{rng.uniform(0.3, world.width_m() - 0.3),
           rng.uniform(0.3, world.height_m() - 0.3)};
    double d = distance(a, b);
    if (d < min_dist || d > max_dist) continue;
    if (sim::collision_check(world, Pose{a.x, a.y, 0.0}, sim::kRobotRadius)) continue;
    if (sim::collision_check(world, Pose{b.x, b.y, 0.0}, sim::kRobotRadius)) continue;
    return {a, b};
  }
  throw DatasetError("could not sample a start/goal pair with clearance");
}

namespace {

// one full demo attempt chain: endpoints -> plan -> follow -> labels
bool make_record(const sim::World& world, int world_index, Rng rng,
                 const DatasetConfig& cfg, TrainRecord* out) {
  for (int attempt = 0; attempt < 20; ++attempt) {
    Rng sub = rng.fork(200 + attempt);
    try {
      auto [a, b] = sample_endpoint_pair(world, sub, cfg.min_goal_dist, cfg.max_goal_dist);
      PlanResult plan = plan_path(world, a, b);
      double h0 = initial_heading(plan, sub, cfg.heading_jitter_deg * M_PI / 180.0);
      FollowParams fp = cfg.follow;
      fp.noise_scale = cfg.demo_noise;
      Demo demo = follow_plan(world, plan, Pose{a.x, a.y, h0}, sub, fp);
      if (demo.steps.size() < 8) continue;  // degenerate stub demo

      TrainRecord rec;
      rec.kept = subsample_demo(demo, sub, cfg.max_kept);
      rec.world_index = world_index;
      rec.goal = demo.goal;
      rec.total_len = rec.kept.back().cum_len;
      if (rec.total_len < 0.5) continue;
      rec.exec.reserve(rec.kept.size());
      for (const KeptFrame& kf : rec.kept) {
        Pose q = jitter_pose(world, kf.pose, sub, cfg.jitter_xy,
                             cfg.jitter_theta_deg * M_PI / 180.0);
        Labels lb = compute_labels(rec.kept, q);
        rec.exec.push_back(QueryFrame{q, sim::render(world, q),
                                      static_cast<float>(lb.wp_x),
                                      static_cast<float>(lb.wp_y),
                                      static_cast<float>(lb.phi)});
      }
      *out = std::move(rec);
      return true;
    } catch (const NoPathError&) {
    } catch (const ControllerTimeoutError&) {
    } catch (const CollisionError&) {
    } catch (const DatasetError&) {
    }
  }
  return false;
}

}  // namespace

Dataset generate_dataset(const DatasetConfig& config) {
  if (config.world_seeds.empty()) throw DatasetError("dataset needs at least one world");
  Dataset ds;
  ds.worlds.reserve(config.world_seeds.size());
  for (uint64_t s : config.world_seeds)
    ds.worlds.push_back(sim::World::generate(s, config.world_spec));

  int per = config.demos_per_world;
  int64_t total = static_cast<int64_t>(ds.worlds.size()) * per;
  std::vector<TrainRecord> slots(static_cast<size_t>(total));
  std::vector<uint8_t> ok(static_cast<size_t>(total), 0);
  Rng master(config.seed);
  parallel_for(total, [&](int64_t i) {
    int w = static_cast<int>(i / per);
    ok[static_cast<size_t>(i)] =
        make_record(ds.worlds[static_cast<size_t>(w)], w,
                    master.fork(static_cast<uint64_t>(i)), config,
                    &slots[static_cast<size_t>(i)]);
  });
  for (int64_t i = 0; i < total; ++i)
    if (ok[static_cast<size_t>(i)])
      ds.records.push_back(std::move(slots[static_cast<size_t>(i)]));
  if (ds.records.size() < static_cast<size_t>(total) * 9 / 10)
    throw DatasetError("too many demo failures during dataset generation");
  return ds;
}

void Dataset::save(const std::string& dir) const {
  fs::create_directories(fs::path(dir) / "worlds");
  json man;
  man["format"] = "bnav-dataset-1";
  man["num_records"] = records.size();
  man["num_rays"] = sim::kNumRays;
  std::vector<std::string> world_files;
  for (size_t i = 0; i < worlds.size(); ++i) {
    std::string rel = "worlds/w" + std::to_string(i) + ".bin";
    worlds[i].save((fs::path(dir) / rel).string());
    world_files.push_back(rel);
  }
  man["worlds"] = world_files;
  man["records"] = "records.bin";

  BinWriter out((fs::path(dir) / "records.bin").string());
  out.put<uint32_t>(static_cast<uint32_t>(records.size()));
  for (const TrainRecord& r : records) {
    out.put<int32_t>(r.encoder_source);
    out.put<int32_t>(r.world_index);
    out.put<double>(r.goal.x);
    out.put<double>(r.goal.y);
    out.put<double>(r.total_len);
    out.put<uint32_t>(static_cast<uint32_t>(r.kept.size()));
    for (const KeptFrame& k : r.kept) {
      out.put<int32_t>(k.src_index);
      out.put<double>(k.pose.x);
      out.put<double>(k.pose.y);
      out.put<double>(k.pose.theta);
      out.put<double>(k.cum_len);
    }
    out.put<uint32_t>(static_cast<uint32_t>(r.exec.size()));
    for (const QueryFrame& q : r.exec) {
      out.put<double>(q.pose.x);
      out.put<double>(q.pose.y);
      out.put<double>(q.pose.theta);
      out.put<float>(q.wp_x);
      out.put<float>(q.wp_y);
      out.put<float>(q.phi);
    }
  }
  out.check();

  std::ofstream mf(fs::path(dir) / "manifest.json");
  mf << man.dump(2) << "\n";
  if (!mf) throw IoError("cannot write dataset manifest");
}

Dataset Dataset::load(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw IoError("cannot open dataset manifest in " + dir);
  json man = json::parse(mf, nullptr, false);
  if (man.is_discarded() || man.value("format", "") != "bnav-dataset-1")
    throw IoError("unrecognized dataset manifest in " + dir);

  Dataset ds;
  for (const auto& rel : man.at("worlds"))
    ds.worlds.push_back(sim::World::load((fs::path(dir) / rel.get<std::string>()).string()));

  BinReader in((fs::path(dir) / man.value("records", "records.bin")).string());
  uint32_t n = in.get<uint32_t>();
  ds.records.resize(n);
  for (uint32_t i = 0; i < n; ++i) {
    TrainRecord& r = ds.records[i];
    r.encoder_source = in.get<int32_t>();
    r.world_index = in.get<int32_t>();
    r.goal.x = in.get<double>();
    r.goal.y = in.get<double>();
    r.total_len = in.get<double>();
    r.kept.resize(in.get<uint32_t>());
    for (KeptFrame& k : r.kept) {
      k.src_index = in.get<int32_t>();
      k.pose.x = in.get<double>();
      k.pose.y = in.get<double>();
      k.pose.theta = in.get<double>();
      k.cum_len = in.get<double>();
    }
    r.exec.resize(in.get<uint32_t>());
    for (QueryFrame& q : r.exec) {
      q.pose.x = in.get<double>();
      q.pose.y = in.get<double>();
      q.pose.theta = in.get<double>();
      q.wp_x = in.get<float>();
      q.wp_y = in.get<float>();
      q.phi = in.get<float>();
    }
    if (r.world_index < 0 || r.world_index >= static_cast<int>(ds.worlds.size()))
      throw IoError("record references a missing world");
  }

  // observations are a pure function of (world, pose); rebuild them
  parallel_for(static_cast<int64_t>(ds.records.size()), [&](int64_t i) {
    TrainRecord& r = ds.records[static_cast<size_t>(i)];
    const sim::World& w = ds.worlds[static_cast<size_t>(r.world_index)];
    for (KeptFrame& k : r.kept) k.obs = sim::render(w, k.pose);
    for (QueryFrame& q : r.exec) q.obs = sim::render(w, q.pose);
  });
  return ds;
}

}  // namespace bnav::expert
