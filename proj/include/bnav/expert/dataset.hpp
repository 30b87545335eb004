#pragma once

#include <string>
#include <vector>

#include "bnav/expert/labels.hpp"
#include "bnav/sim/world.hpp"

namespace bnav::expert {

// One query the policy is trained on: where the robot "is", what it sees,
// and the supervised waypoint/progress targets.
struct QueryFrame {
  Pose pose;
  sim::Observation obs;
  float wp_x = 0.0f;
  float wp_y = 0.0f;
  float phi = 0.0f;
};

// One behavior demonstration prepared for training. Base records pair each
// kept frame with a jittered query; relabeled closed-loop records keep the
// full 10 Hz execution stream and point at their base demo for the
// demonstration embedding.
struct TrainRecord {
  std::vector<KeptFrame> kept;
  std::vector<QueryFrame> exec;
  int encoder_source = -1;  // -1: self; else index of the base record
  int world_index = 0;
  Vec2 goal;
  double total_len = 0.0;  // kept arc length, meters

  const std::vector<KeptFrame>& demo_frames(const std::vector<TrainRecord>& all) const {
    return encoder_source < 0 ? kept : all[static_cast<size_t>(encoder_source)].kept;
  }
};

struct Dataset {
  std::vector<sim::World> worlds;
  std::vector<TrainRecord> records;

  // Observations are not stored on disk; load() re-renders them from poses,
  // which is deterministic given the world files.
  void save(const std::string& dir) const;
  static Dataset load(const std::string& dir);
};

struct DatasetConfig {
  std::vector<uint64_t> world_seeds;
  sim::WorldSpec world_spec;
  int demos_per_world = 300;
  uint64_t seed = 1;
  double demo_noise = 0.1;
  int max_kept = 64;
  double min_goal_dist = 2.0;
  double max_goal_dist = 8.0;
  double jitter_xy = 0.2;
  double jitter_theta_deg = 20.0;
  double heading_jitter_deg = 30.0;
  FollowParams follow;
};

// Expert demonstrations across the configured worlds, subsampled and
// labeled. Runs demos through parallel_for; per-demo RNG streams make the
// result independent of scheduling.
Dataset generate_dataset(const DatasetConfig& config);

// start/goal pair with clearance and a distance window; throws DatasetError
// after too many rejections
std::pair<Vec2, Vec2> sample_endpoint_pair(const sim::World& world, Rng& rng,
                                           double min_dist, double max_dist);

}  // namespace bnav::expert
