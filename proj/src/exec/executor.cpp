#include "bnav/exec/executor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "bnav/common.hpp"

namespace bnav::exec {

sim::Command control_from_waypoint(double wp_x, double wp_y, const ExecParams& p) {
  double alpha = std::atan2(wp_y, wp_x);
  double dist = std::hypot(wp_x, wp_y);
  sim::Command cmd;
  cmd.omega = p.k_theta * alpha;
  double ramp = std::clamp(dist / p.slow_radius, p.v_floor, 1.0);
  cmd.v = p.limits.v_max * std::max(0.0, std::cos(alpha)) * ramp;
  return cmd;
}

BehaviorResult execute_behavior(const sim::World& world,
                                const nn::CbeModel<float>& model,
                                const std::vector<float>& z,
                                const std::vector<float>& A_start,
                                const std::vector<float>& A_goal,
                                const Pose& start, int budget_steps,
                                const ExecParams& params, Rng& rng,
                                RolloutLog* log, std::vector<TraceRow>* trace,
                                int trace_segment) {
  auto es = model.encoder_begin();
  auto gs = model.generator_begin();
  std::vector<float> p_start = model.proj_features(A_start);
  std::vector<float> p_goal = model.proj_features(A_goal);
  sim::NoiseModel noise{params.noise_scale};
  std::vector<float> z_used = z;
  if (params.zero_embedding) std::fill(z_used.begin(), z_used.end(), 0.0f);

  BehaviorResult res;
  Pose pose = start;
  for (int step = 0; step < budget_steps; ++step) {
    if (sim::collision_check(world, pose, sim::kRobotRadius)) {
      res.status = SegmentStatus::Crashed;
      res.final_pose = pose;
      res.steps = step;
      return res;
    }
    sim::Observation obs = sim::render(world, pose);
    std::vector<float> A_cur = model.obs_features(obs);
    std::vector<float> zp = model.encoder_push_features(es, A_cur);
    std::vector<float> pc = model.proj_features(A_cur);
    std::vector<float> r_s = model.relation_from_proj(pc, p_start);
    std::vector<float> r_g = model.relation_from_proj(pc, p_goal);
    if (params.zero_relation) {
      std::fill(r_s.begin(), r_s.end(), 0.0f);
      std::fill(r_g.begin(), r_g.end(), 0.0f);
    }
    auto out = model.generator_push(gs, z_used, zp, r_s, r_g);

    if (log) {
      log->poses.push_back(pose);
      log->obs.push_back(obs);
      log->phi.push_back(out.phi);
    }

    if (out.phi >= params.phi_switch) {  // segment done; do not move
      if (trace)
        trace->push_back(TraceRow{trace_segment, step, pose, out.wp_x, out.wp_y,
                                  out.phi, 0.0f, 0.0f});
      res.status = SegmentStatus::Switched;
      res.final_pose = pose;
      res.steps = step;
      return res;
    }

    sim::Command cmd = control_from_waypoint(out.wp_x, out.wp_y, params);
    if (trace)
      trace->push_back(TraceRow{trace_segment, step, pose, out.wp_x, out.wp_y,
                                out.phi, static_cast<float>(cmd.v),
                                static_cast<float>(cmd.omega)});
    pose = sim::step_dynamics(pose, cmd, params.limits, noise, rng);
  }
  res.status = SegmentStatus::BudgetExhausted;
  res.final_pose = pose;
  res.steps = budget_steps;
  return res;
}

std::vector<int> segment_boundaries(int num_kept, int frames_per_segment) {
  if (num_kept < 2) throw DatasetError("segmentation needs at least two kept frames");
  if (frames_per_segment < 1) throw DatasetError("frames_per_segment must be positive");
  std::vector<int> b;
  for (int i = 0; i * frames_per_segment < num_kept - 1; ++i)
    b.push_back(i * frames_per_segment);
  b.push_back(num_kept - 1);
  return b;
}

BehaviorMemory build_memory(const nn::CbeModel<float>& model,
                            const std::vector<expert::KeptFrame>& kept,
                            int frames_per_segment) {
  std::vector<int> bounds = segment_boundaries(static_cast<int>(kept.size()),
                                               frames_per_segment);
  BehaviorMemory mem;
  for (int bi : bounds) {
    mem.attractors.push_back(model.obs_features(kept[static_cast<size_t>(bi)].obs));
    mem.goals.push_back(kept[static_cast<size_t>(bi)].pose.position());
  }
  mem.goals.erase(mem.goals.begin());  // goals are the segment end boundaries
  for (size_t s = 0; s + 1 < bounds.size(); ++s) {
    int b0 = bounds[s], b1 = bounds[s + 1];
    std::vector<sim::Observation> frames;
    for (int t = b0; t <= b1; ++t)
      frames.push_back(kept[static_cast<size_t>(t)].obs);
    mem.embeddings.push_back(model.encode_demo(frames));
    mem.nominal_steps.push_back(kept[static_cast<size_t>(b1)].src_index -
                                kept[static_cast<size_t>(b0)].src_index + 1);
  }
  return mem;
}

SequenceResult execute_sequence(const sim::World& world,
                                const nn::CbeModel<float>& model,
                                const BehaviorMemory& memory, const Pose& start,
                                const ExecParams& params, Rng& rng,
                                std::vector<TraceRow>* trace) {
  if (memory.count() == 0) throw DatasetError("empty behavior memory");
  if (memory.attractors.size() != memory.count() + 1 ||
      memory.nominal_steps.size() != memory.count())
    throw DatasetError("inconsistent behavior memory");

  SequenceResult res;
  Pose pose = start;
  for (size_t s = 0; s < memory.count(); ++s) {
    int budget = std::max(20, static_cast<int>(std::lround(
                                  params.budget_factor * memory.nominal_steps[s])));
    BehaviorResult br = execute_behavior(
        world, model, memory.embeddings[s], memory.attractors[s],
        memory.attractors[s + 1], pose, budget, params, rng, nullptr,
        trace, static_cast<int>(s));
    pose = br.final_pose;
    res.total_steps += br.steps;
    res.statuses.push_back(br.status);
    if (br.status == SegmentStatus::Crashed) {
      res.completed = false;
      res.final_pose = pose;
      return res;
    }
  }
  res.completed = std::all_of(res.statuses.begin(), res.statuses.end(),
                              [](SegmentStatus s) { return s == SegmentStatus::Switched; });
  res.final_pose = pose;
  return res;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open trace for write: " + path);
  os << "segment,step,x,y,theta,wp_x,wp_y,phi,v,omega\n";
  for (const TraceRow& r : rows) {
    os << r.segment << ',' << r.step << ',' << r.pose.x << ',' << r.pose.y << ','
       << r.pose.theta << ',' << r.wp_x << ',' << r.wp_y << ',' << r.phi << ','
       << r.v << ',' << r.omega << '\n';
  }
  if (!os) throw IoError("trace write failed: " + path);
}

}  // namespace bnav::exec
