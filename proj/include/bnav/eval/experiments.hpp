#pragma once

#include <string>
#include <vector>

#include "bnav/eval/config.hpp"
#include "bnav/eval/metrics.hpp"
#include "bnav/map/classifier.hpp"
#include "bnav/map/topo.hpp"
#include "bnav/nn/model.hpp"

namespace bnav::eval {

// One held-out behavior: an expert demonstration encoded for execution.
struct EvalBehavior {
  std::vector<expert::KeptFrame> kept;
  std::vector<float> z, A_start, A_goal;
  Pose exec_start;   // jittered demonstration start
  Vec2 goal;         // last kept pose
  int demo_steps = 0;
  double demo_len = 0.0;  // kept arc length, meters
  double net_turn = 0.0;  // signed accumulated heading change, radians
  std::vector<Pose> demo_poses;  // full 10 Hz stream, for obstacle placement
};

// Rejection-samples an expert demonstration whose source step count lands
// near `target_steps` (window widened on repeated failure), then encodes it.
// Throws DatasetError when the world cannot produce such a path.
EvalBehavior sample_eval_behavior(const sim::World& world,
                                  const nn::CbeModel<float>& model,
                                  int target_steps, const ExperimentConfig& cfg,
                                  Rng& rng);

struct TrialResult {
  bool success = false;  // no crash and the final pose is inside the radius
  int steps = 0;
  double dist = 0.0;  // final distance to the behavior goal, meters
  exec::SegmentStatus status = exec::SegmentStatus::BudgetExhausted;
};

TrialResult run_behavior_trial(const sim::World& world,
                               const nn::CbeModel<float>& model,
                               const EvalBehavior& behavior,
                               const exec::ExecParams& params,
                               double success_radius, Rng& rng);

// Each sweep is deterministic in (config, master seed) for any worker count.
// When `artifact_dir` is non-empty, example rollout traces (and for mapping,
// the map files and a detail table) are written there.

// success by source-step bucket for full / no-attractor / no-embedding
MetricsTable run_single_behavior_sweep(const ExperimentConfig& cfg,
                                       const nn::CbeModel<float>& model,
                                       const std::string& artifact_dir = "");

// unseen square obstacle injected near the demo path after encoding
MetricsTable run_obstacle_sweep(const ExperimentConfig& cfg,
                                const nn::CbeModel<float>& model,
                                const std::string& artifact_dir = "");

// actuation-noise robustness; extra column reports degradation vs s=0
MetricsTable run_noise_sweep(const ExperimentConfig& cfg,
                             const nn::CbeModel<float>& model,
                             const std::string& artifact_dir = "");

// long routes segmented at each K, plus single-embedding and no-attractor
// baselines; extra column is the achieved compression ratio (steps/behavior)
MetricsTable run_path_following_sweep(const ExperimentConfig& cfg,
                                      const nn::CbeModel<float>& model,
                                      const std::string& artifact_dir = "");

// site worlds: pairwise demos, full-map route execution, and connectivity
// at demo fractions with choice-point vs fixed-distance segmentation
MetricsTable run_mapping_experiment(const ExperimentConfig& cfg,
                                    const nn::CbeModel<float>& model,
                                    const map::DirectionClassifier& clf,
                                    const std::string& artifact_dir = "");

// 2D principal-component projection of held-out behavior embeddings with
// shape metadata, written as CSV (x, y, net turn, length, steps)
void export_manifold(const ExperimentConfig& cfg, const nn::CbeModel<float>& model,
                     const std::string& csv_path);

// full-demonstration map for one site world (all ordered pairs)
struct SiteMapBundle {
  sim::SiteWorld site_world;
  map::TopoMap map;
  int demos = 0;
  size_t dense_bytes = 0;  // raw observation storage of the source demos
};

SiteMapBundle build_site_map(const ExperimentConfig& cfg,
                             const nn::CbeModel<float>& model,
                             const map::DirectionClassifier& clf,
                             uint64_t world_seed);

}  // namespace bnav::eval
