#pragma once

#include <string>
#include <vector>

#include "bnav/exec/executor.hpp"
#include "bnav/map/classifier.hpp"
#include "bnav/nn/model.hpp"

namespace bnav::map {

// local maxima with at least the given prominence, greedily thinned (highest
// first) so surviving peaks are >= min_separation indices apart
std::vector<int> find_peaks(const std::vector<double>& trace, double prominence,
                            int min_separation);

struct PeakParams {
  double prominence = 0.15;
  int min_separation = 16;  // kept frames
};

struct ChoicePoints {
  std::vector<int> indices;   // strictly increasing
  std::vector<double> sigma;  // full variance trace, one entry per kept frame
};

ChoicePoints detect_choice_points(const std::vector<expert::KeptFrame>& kept,
                                  const DirectionClassifier& clf,
                                  const PeakParams& pp = {});

enum class EdgeType : uint8_t { Behavioral = 0, Proximal = 1 };

struct MapVertex {
  int id = 0;
  int demo_id = 0;
  int frame_index = 0;         // kept-frame index in the source demo
  std::vector<float> feature;  // attractor feature
  std::vector<float> rays;     // normalized panorama, for heading-tolerant linking
};

struct MapEdge {
  EdgeType type = EdgeType::Behavioral;
  int from = 0, to = 0;  // proximal edges are traversable both ways
  double cost = 0.0;     // behavioral: nominal source steps; proximal: c_p
  std::vector<float> embedding;  // behavioral only
};

struct MapParams {
  int frames_per_segment = 48;  // distance-based fallback segmentation
  double link_tau = 0.95;       // ray-shift similarity threshold for linking
  double link_margin = 0.2;     // feature gate is link_tau - link_margin
  double proximal_cost = 5.0;   // steps-equivalent cost of a proximal hop
  double tau_loc = 0.6;         // localization acceptance threshold
  int min_boundary_gap = 4;     // kept frames between segment boundaries
  bool use_choice_points = true;
  PeakParams peaks;
};

struct TopoMap {
  std::vector<MapVertex> vertices;
  std::vector<MapEdge> edges;
  MapParams params;
};

// Segment each demonstration at its choice points (distance-subdivided where
// gaps exceed K), add a vertex per boundary and a directed behavioral edge
// per segment, then link attractors across demonstrations.
TopoMap build_map(const nn::CbeModel<float>& model, const DirectionClassifier* clf,
                  const std::vector<std::vector<expert::KeptFrame>>& demos,
                  const MapParams& params = {});

// segment boundaries honoring hint indices; every span is <= K kept frames
std::vector<int> boundaries_with_hints(int num_kept, int frames_per_segment,
                                       const std::vector<int>& hints, int min_gap);

// Adds bidirectional proximal edges between vertices of different demos that
// look alike: feature cosine >= tau - margin and best-circular-ray-shift
// cosine >= tau. Safe to call repeatedly.
void link_attractors(TopoMap* map, double tau);

// Drops the later of two behavioral edges whose endpoint pairs are identical
// or proximally linked; reachability is preserved through the kept edge.
void dedupe_behaviors(TopoMap* map);

// best-cosine vertex for an observation; LocalizationReject below tau_loc
int localize(const TopoMap& map, const nn::CbeModel<float>& model,
             const sim::Observation& obs);

struct BehaviorStep {
  std::vector<float> z, A_start, A_goal;
  int nominal_steps = 0;
  int edge_index = -1;
};

struct RoutePlan {
  std::vector<int> vertex_path;  // includes start and goal vertices
  std::vector<int> edge_path;    // indices into map.edges
  double cost = 0.0;
  std::vector<BehaviorStep> behaviors;  // proximal hops contribute none
};

// least-cost route between vertices; NoRouteError when disconnected
RoutePlan plan_route(const TopoMap& map, int start_vertex, int goal_vertex);

// localize both observations, then plan
RoutePlan plan_route(const TopoMap& map, const nn::CbeModel<float>& model,
                     const sim::Observation& start_obs,
                     const sim::Observation& goal_obs);

// fraction of ordered location pairs with successful localization and a route
double connectivity_metric(const TopoMap& map, const nn::CbeModel<float>& model,
                           const sim::World& world,
                           const std::vector<Pose>& locations);

// run a planned route; each behavior gets budget_factor x nominal steps
exec::SequenceResult execute_route(const sim::World& world,
                                   const nn::CbeModel<float>& model,
                                   const RoutePlan& plan, const Pose& start,
                                   const exec::ExecParams& params, Rng& rng,
                                   std::vector<exec::TraceRow>* trace = nullptr);

// text header + little-endian payload; load verifies the parameter hash
void save_map(const std::string& path, const TopoMap& map);
TopoMap load_map(const std::string& path);

}  // namespace bnav::map
