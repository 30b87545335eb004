#pragma once

#include <vector>

#include "bnav/expert/follower.hpp"
#include "bnav/rng.hpp"

namespace bnav::expert {

struct KeptFrame {
  int src_index = 0;   // index into the 10 Hz demo
  Pose pose;
  sim::Observation obs;
  double cum_len = 0.0;  // arc length along kept poses up to this frame
};

// Stochastic temporal subsampling: frame 0 always kept, then gaps drawn
// uniformly from {0,1,2}; the last frame is forced in. If the result
// exceeds max_kept (> 0), frames are re-spaced evenly keeping the ends.
std::vector<KeptFrame> subsample_demo(const Demo& demo, Rng& rng, int max_kept);

struct Labels {
  double wp_x = 0.0;  // lookahead kept pose, query frame
  double wp_y = 0.0;
  double phi = 0.0;   // progress along the kept sequence, [0,1]
  int nearest = 0;    // index of the matched kept frame
};

constexpr int kWaypointLookahead = 5;  // kept frames ahead of the match

// Nearest kept frame by position (ties break to the smaller index); the
// waypoint is the pose kWaypointLookahead kept frames ahead expressed in
// the query frame; phi is the matched frame's share of the kept arc length.
Labels compute_labels(const std::vector<KeptFrame>& kept, const Pose& query);

// Pose perturbation for query generation: offsets uniform in +/- max_xy per
// axis and +/- max_theta. Resamples while colliding; falls back to the
// unjittered pose after `tries` attempts.
Pose jitter_pose(const sim::World& world, const Pose& pose, Rng& rng,
                 double max_xy = 0.2, double max_theta = 20.0 * M_PI / 180.0,
                 int tries = 20);

}  // namespace bnav::expert
