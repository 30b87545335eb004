#include "bnav/expert/labels.hpp"

#include <algorithm>
#include <cmath>

#include "bnav/common.hpp"

namespace bnav::expert {

std::vector<KeptFrame> subsample_demo(const Demo& demo, Rng& rng, int max_kept) {
  if (demo.steps.empty()) throw DatasetError("cannot subsample an empty demo");
  int n = static_cast<int>(demo.steps.size());
  std::vector<int> idx;
  for (int i = 0; i < n; i += 1 + static_cast<int>(rng.uniform_int(3)))
    idx.push_back(i);
  if (idx.back() != n - 1) idx.push_back(n - 1);

  if (max_kept > 0 && static_cast<int>(idx.size()) > max_kept) {
    std::vector<int> spaced;
    int m = static_cast<int>(idx.size());
    for (int j = 0; j < max_kept; ++j) {
      int k = static_cast<int>(std::llround(
          static_cast<double>(j) * (m - 1) / (max_kept - 1)));
      if (spaced.empty() || idx[k] != spaced.back()) spaced.push_back(idx[k]);
    }
    idx = std::move(spaced);
  }

  std::vector<KeptFrame> kept;
  kept.reserve(idx.size());
  double cum = 0.0;
  for (size_t j = 0; j < idx.size(); ++j) {
    const DemoStep& s = demo.steps[static_cast<size_t>(idx[j])];
    if (j > 0) cum += distance(s.pose.position(), kept.back().pose.position());
    kept.push_back(KeptFrame{idx[j], s.pose, s.obs, cum});
  }
  return kept;
}

Labels compute_labels(const std::vector<KeptFrame>& kept, const Pose& query) {
  if (kept.empty()) throw DatasetError("labels need at least one kept frame");
  int best = 0;
  double best_d = 1e18;
  for (size_t k = 0; k < kept.size(); ++k) {
    double d = distance(query.position(), kept[k].pose.position());
    if (d < best_d - 1e-12) {  // strict: ties keep the smaller index
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  int ahead = std::min(best + kWaypointLookahead,
                       static_cast<int>(kept.size()) - 1);
  Vec2 wp = query.to_frame(kept[static_cast<size_t>(ahead)].pose.position());
  double total = kept.back().cum_len;
  Labels out;
  out.wp_x = wp.x;
  out.wp_y = wp.y;
  out.phi = total > 1e-9 ? kept[static_cast<size_t>(best)].cum_len / total : 1.0;
  out.nearest = best;
  return out;
}

Pose jitter_pose(const sim::World& world, const Pose& pose, Rng& rng,
                 double max_xy, double max_theta, int tries) {
  for (int t = 0; t < tries; ++t) {
    Pose q{pose.x + rng.uniform(-max_xy, max_xy),
           pose.y + rng.uniform(-max_xy, max_xy),
           wrap_angle(pose.theta + rng.uniform(-max_theta, max_theta))};
    if (!sim::collision_check(world, q, sim::kRobotRadius) &&
        !world.occupied_at(q.x, q.y))
      return q;
  }
  return pose;
}

}  // namespace bnav::expert
