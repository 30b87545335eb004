#pragma once

#include <string>
#include <vector>

#include "bnav/expert/labels.hpp"
#include "bnav/nn/model.hpp"
#include "bnav/sim/dynamics.hpp"
#include "bnav/sim/sensor.hpp"
#include "bnav/sim/world.hpp"

namespace bnav::exec {

constexpr double kPhiSwitch = 0.95;  // progress threshold ending a segment

struct ExecParams {
  double phi_switch = kPhiSwitch;
  double k_theta = 2.0;       // heading gain toward the predicted waypoint
  double slow_radius = 0.5;   // speed ramps down inside this waypoint range
  double v_floor = 0.2;       // fraction of v_max kept when nearly stopped
  double budget_factor = 2.0; // budget = factor * nominal source steps
  double noise_scale = 0.0;
  bool zero_relation = false;   // ablation: blank attractor relations
  bool zero_embedding = false;  // ablation: blank the behavior embedding
  sim::MotionLimits limits;
};

// body-frame waypoint -> velocity command (shared by every execution path)
sim::Command control_from_waypoint(double wp_x, double wp_y, const ExecParams& p);

enum class SegmentStatus { Switched, BudgetExhausted, Crashed };

struct TraceRow {
  int segment = 0;
  int step = 0;
  Pose pose;
  float wp_x = 0.0f, wp_y = 0.0f, phi = 0.0f;
  float v = 0.0f, omega = 0.0f;
};

// per-step record of a behavior execution, also used for relabeling
struct RolloutLog {
  std::vector<Pose> poses;
  std::vector<sim::Observation> obs;
  std::vector<float> phi;
};

struct BehaviorResult {
  SegmentStatus status = SegmentStatus::BudgetExhausted;
  Pose final_pose;
  int steps = 0;
};

// Closed-loop execution of one behavior: fresh encoder/generator states, one
// model update per simulation step, switch as soon as phi crosses the
// threshold (checked before moving). A crash ends the rollout but the log
// keeps the prefix.
BehaviorResult execute_behavior(const sim::World& world,
                                const nn::CbeModel<float>& model,
                                const std::vector<float>& z,
                                const std::vector<float>& A_start,
                                const std::vector<float>& A_goal,
                                const Pose& start, int budget_steps,
                                const ExecParams& params, Rng& rng,
                                RolloutLog* log = nullptr,
                                std::vector<TraceRow>* trace = nullptr,
                                int trace_segment = 0);

// kept-frame boundaries every K frames plus the final frame
std::vector<int> segment_boundaries(int num_kept, int frames_per_segment);

// Route memory: attractor features at segment boundaries plus one embedding
// and step budget per segment.
struct BehaviorMemory {
  std::vector<std::vector<float>> attractors;  // n+1 x obs_feat
  std::vector<std::vector<float>> embeddings;  // n x z
  std::vector<int> nominal_steps;              // n, source 10 Hz steps
  std::vector<Vec2> goals;                     // n, boundary positions (diagnostics)

  size_t count() const { return embeddings.size(); }
  size_t bytes() const {
    size_t f = 0;
    for (const auto& a : attractors) f += a.size();
    for (const auto& e : embeddings) f += e.size();
    return f * sizeof(float);
  }
};

// Segment a kept demonstration into behaviors of at most K kept frames and
// encode each one.
BehaviorMemory build_memory(const nn::CbeModel<float>& model,
                            const std::vector<expert::KeptFrame>& kept,
                            int frames_per_segment);

struct SequenceResult {
  bool completed = false;  // every segment switched
  Pose final_pose;
  int total_steps = 0;
  std::vector<SegmentStatus> statuses;
};

// Runs the behaviors in order; encoder/generator state resets at each
// switch. A crash aborts the remaining segments.
SequenceResult execute_sequence(const sim::World& world,
                                const nn::CbeModel<float>& model,
                                const BehaviorMemory& memory, const Pose& start,
                                const ExecParams& params, Rng& rng,
                                std::vector<TraceRow>* trace = nullptr);

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);

}  // namespace bnav::exec
