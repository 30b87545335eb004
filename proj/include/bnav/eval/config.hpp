#pragma once

#include <string>
#include <vector>

#include "bnav/exec/executor.hpp"
#include "bnav/expert/dataset.hpp"
#include "bnav/map/classifier.hpp"
#include "bnav/map/topo.hpp"
#include "bnav/train/trainer.hpp"

namespace bnav::eval {

// Everything an experiment run needs, resolved from JSON with defaults.
// The master seed plus the config fully determine every rng stream.
struct ExperimentConfig {
  std::string name = "desk";
  std::string out_dir = "results";
  uint64_t master_seed = 1234;

  std::vector<uint64_t> train_seeds{101, 102, 103, 104, 105, 106};
  std::vector<uint64_t> heldout_seeds{201, 202};
  std::vector<uint64_t> mapping_seeds{301, 302};

  sim::WorldSpec train_world;     // dataset worlds
  sim::WorldSpec eval_world;      // held-out worlds for behavior sweeps
  sim::WorldSpec follow_world;    // bigger held-out worlds; long routes must fit
  sim::SiteWorldSpec site_world;  // mapping worlds; sites = map_locations

  expert::DatasetConfig dataset;     // world_seeds/world_spec filled on load
  train::TrainConfig train;
  train::DaggerConfig dagger;
  map::ClassifierConfig classifier;
  map::MapParams map_params;

  exec::ExecParams exec_params;
  double success_radius = 0.45;  // execution success, meters to goal

  std::vector<int> length_buckets{16, 32, 64, 96, 128, 192};
  std::vector<double> obstacle_offsets{0.0, 0.075, 0.15, 0.225};
  std::vector<double> noise_scales{0.0, 0.5, 1.0};
  std::vector<int> follow_segment_frames{16, 32, 48, 64};
  std::vector<double> demo_fractions{0.25, 0.5, 0.75, 1.0};

  int trials = 120;            // per sweep condition
  int follow_trials = 50;      // long-path conditions are slower
  int robustness_steps = 64;   // source-step target, obstacle/noise sweeps
  int follow_steps = 420;      // source-step target for long routes
  int map_locations = 8;       // per mapping world
  int conn_draws = 3;          // demo subsets averaged per fraction
  int manifold_samples = 150;  // embeddings exported for the 2D projection
};

// JSON file -> config; missing keys keep their defaults. Throws IoError on
// unreadable files or malformed JSON, DatasetError when the held-out or
// mapping seeds overlap the training seeds.
ExperimentConfig load_config(const std::string& path);

// applies defaults/validation to an in-memory JSON string (tests)
ExperimentConfig parse_config(const std::string& json_text);

// resolved config as pretty JSON; load(parse(dump(c))) == c
std::string config_json(const ExperimentConfig& cfg);

void write_snapshot(const std::string& out_dir, const ExperimentConfig& cfg);

}  // namespace bnav::eval
