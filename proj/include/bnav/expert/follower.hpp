#pragma once

#include <vector>

#include "bnav/expert/planner.hpp"
#include "bnav/rng.hpp"
#include "bnav/sim/dynamics.hpp"
#include "bnav/sim/sensor.hpp"
#include "bnav/sim/world.hpp"

namespace bnav::expert {

struct FollowParams {
  double lookahead = 0.5;      // pursuit distance along the plan, meters
  double k_theta = 2.0;        // heading gain
  double k_rep = 1.2;          // ray repulsion gain
  double d_safe = 0.4;         // rays closer than this push away, meters
  double eps_goal = 0.3;       // expert success radius, meters
  double noise_scale = 0.0;    // actuation noise during the demo
  double timeout_factor = 5.0; // steps budget multiplier on nominal time
  sim::MotionLimits limits;
};

struct DemoStep {
  Pose pose;
  sim::Observation obs;
  float v = 0.0f;      // commanded (pre-noise) controls
  float omega = 0.0f;
};

struct Demo {
  std::vector<DemoStep> steps;
  Vec2 goal;
  double plan_length = 0.0;
};

// Pursuit-style tracking of a string-pulled plan with ray repulsion near
// obstacles. Records pose/observation/command at 10 Hz until the goal is
// within eps_goal. Throws ControllerTimeoutError or CollisionError.
Demo follow_plan(const sim::World& world, const PlanResult& plan,
                 const Pose& start, Rng& rng, const FollowParams& params = {});

// plan direction at the start, jittered by +/- jitter_rad
double initial_heading(const PlanResult& plan, Rng& rng, double jitter_rad);

}  // namespace bnav::expert
