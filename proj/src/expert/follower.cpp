#include "bnav/expert/follower.hpp"

#include <algorithm>
#include <cmath>

#include "bnav/common.hpp"

namespace bnav::expert {

using sim::kDt;

namespace {

// closest-point arc coordinate on the polyline, monotonic via a floor
double project_arc(const std::vector<Vec2>& pts, const Vec2& p, double floor_s) {
  double best_d = 1e18, best_s = floor_s, acc = 0.0;
  for (size_t i = 1; i < pts.size(); ++i) {
    Vec2 a = pts[i - 1], b = pts[i];
    Vec2 ab = b - a;
    double len2 = ab.dot(ab);
    double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    Vec2 q = a + ab * t;
    double d = distance(p, q);
    double s = acc + t * std::sqrt(len2);
    if (d < best_d && s >= floor_s - 0.3) {
      best_d = d;
      best_s = s;
    }
    acc += std::sqrt(len2);
  }
  return std::max(best_s, floor_s);
}

}  // namespace

double initial_heading(const PlanResult& plan, Rng& rng, double jitter_rad) {
  Vec2 a = plan.waypoints.front();
  Vec2 b = point_at_arc(plan.waypoints, std::min(0.4, plan.length));
  double base = (distance(a, b) > 1e-6) ? std::atan2(b.y - a.y, b.x - a.x) : 0.0;
  return wrap_angle(base + rng.uniform(-jitter_rad, jitter_rad));
}

Demo follow_plan(const sim::World& world, const PlanResult& plan,
                 const Pose& start, Rng& rng, const FollowParams& params) {
  if (plan.waypoints.size() < 2) throw NoPathError("plan has no waypoints");
  Demo demo;
  demo.goal = plan.waypoints.back();
  demo.plan_length = plan.length;

  int max_steps = 300 + static_cast<int>(params.timeout_factor * plan.length /
                                         (params.limits.v_max * kDt));
  sim::NoiseModel noise{params.noise_scale};
  Pose pose = start;
  double prog = 0.0;
  for (int step = 0; step < max_steps; ++step) {
    if (sim::collision_check(world, pose, sim::kRobotRadius))
      throw CollisionError("expert collided while following the plan");
    sim::Observation obs = sim::render(world, pose);
    double d_goal = distance(pose.position(), demo.goal);
    if (d_goal <= params.eps_goal) {
      demo.steps.push_back(DemoStep{pose, obs, 0.0f, 0.0f});
      return demo;
    }

    prog = project_arc(plan.waypoints, pose.position(), prog);
    Vec2 target = point_at_arc(plan.waypoints, prog + params.lookahead);
    double e = wrap_angle(std::atan2(target.y - pose.y, target.x - pose.x) - pose.theta);
    double omega = params.k_theta * e;
    double v = params.limits.v_max * std::max(0.0, std::cos(e));
    v = std::min(v, std::max(0.2, d_goal));  // ease into the goal

    // rays inside d_safe steer away from the near side and slow down
    double rep = 0.0, max_w = 0.0;
    int cnt = 0;
    for (int i = 0; i < sim::kNumRays; ++i) {
      if (obs.depth[i] >= params.d_safe) continue;
      double wgt = (params.d_safe - obs.depth[i]) / params.d_safe;
      rep += wgt * (sim::ray_bearing(i) > 0.0 ? -1.0 : 1.0);
      max_w = std::max(max_w, wgt);
      ++cnt;
    }
    if (cnt > 0) {
      omega += params.k_rep * rep / cnt;
      v *= 1.0 - 0.6 * max_w;
    }

    demo.steps.push_back(DemoStep{pose, obs,
                                  static_cast<float>(v), static_cast<float>(omega)});
    pose = sim::step_dynamics(pose, sim::Command{v, omega}, params.limits, noise, rng);
  }
  throw ControllerTimeoutError("expert failed to reach the goal in time");
}

}  // namespace bnav::expert
