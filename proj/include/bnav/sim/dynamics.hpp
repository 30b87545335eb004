#pragma once

#include <algorithm>

#include "bnav/geometry.hpp"
#include "bnav/rng.hpp"

namespace bnav::sim {

constexpr double kDt = 0.1;  // 10 Hz control

struct MotionLimits {
  double v_max = 1.0;      // m/s, v clamped to [0, v_max]
  double omega_max = 1.5;  // rad/s, omega clamped to [-omega_max, omega_max]
};

struct Command {
  double v = 0.0;
  double omega = 0.0;
};

// Multiplicative actuation noise u = clip(x, -s, s) + 1 with x ~ N(0, s/2),
// drawn independently for v and omega. noise == 0 disables sampling.
struct NoiseModel {
  double scale = 0.0;  // s

  double sample(Rng& rng) const {
    if (scale <= 0.0) return 1.0;
    double x = rng.normal(0.0, scale / 2.0);
    if (x > scale) x = scale;
    if (x < -scale) x = -scale;
    return x + 1.0;
  }
};

// Unicycle step: clamp the command, scale by actuation noise, then integrate
// heading first so the translation uses the updated heading.
inline Pose step_dynamics(const Pose& p, const Command& cmd,
                          const MotionLimits& lim, const NoiseModel& noise,
                          Rng& rng) {
  double v = std::clamp(cmd.v, 0.0, lim.v_max);
  double w = std::clamp(cmd.omega, -lim.omega_max, lim.omega_max);
  double uv = noise.sample(rng);
  double uw = noise.sample(rng);
  v *= uv;
  w *= uw;
  Pose out;
  out.theta = wrap_angle(p.theta + w * kDt);
  out.x = p.x + v * std::cos(out.theta) * kDt;
  out.y = p.y + v * std::sin(out.theta) * kDt;
  return out;
}

}  // namespace bnav::sim
