#pragma once

#include <string>
#include <vector>

#include "bnav/expert/dataset.hpp"
#include "bnav/nn/layers.hpp"
#include "bnav/nn/tensor.hpp"
#include "bnav/sim/sensor.hpp"

namespace bnav::map {

constexpr int kDirBins = 128;  // waypoint bearing sectors of 360/128 degrees

// bearing in (-pi, pi] -> sector index; bin 64 contains bearing 0
int bin_of_bearing(double theta);
double bin_center(int bin);

// circular variance 1 - |sum_b p_b e^{i theta_b}| over the bin centers
double circular_variance(const std::vector<float>& p);

struct ClassifierDims {
  int rays = 64;
  int feat = 64;    // per-frame feature
  int hidden = 64;  // GRU state
};

// Predicts the direction of the next waypoint from the last k observations
// as a distribution over kDirBins sectors. High dispersion marks places
// where demonstrations diverge (junctions, doorways).
class DirectionClassifier {
 public:
  explicit DirectionClassifier(int k = 8, const ClassifierDims& dims = {},
                               uint64_t seed = 2);

  int window() const { return k_; }
  const ClassifierDims& dims() const { return d_; }
  nn::ParamStore<float>& params() { return ps_; }
  const nn::ParamStore<float>& params() const { return ps_; }

  // distribution for a window; shorter windows are padded by repeating the
  // first frame, longer ones use the most recent k frames
  std::vector<float> predict(const std::vector<sim::Observation>& window) const;
  std::vector<float> predict_ptrs(const std::vector<const sim::Observation*>& w) const;

  // cross-entropy on one padded window; returns the loss, accumulates into g
  double sample_grad(const std::vector<const sim::Observation*>& w, int target,
                     nn::Grads<float>* g) const;

  void save(const std::string& path) const;
  static DirectionClassifier load(const std::string& path);

 private:
  struct Cache;
  void forward(const std::vector<const sim::Observation*>& w, std::vector<float>* p,
               Cache* c) const;

  int k_;
  ClassifierDims d_;
  nn::ParamStore<float> ps_;
  nn::Linear<float> in_fc_, head_;
  nn::Gru<float> gru_;
};

struct ClassifierConfig {
  int k = 8;
  int epochs = 3;
  int batch = 64;
  double lr = 1e-3;
  double lr_decay = 0.7;
  double val_fraction = 0.1;
  uint64_t seed = 23;
  ClassifierDims dims;
};

struct ClassifierReport {
  double train_loss = 0.0;  // mean cross-entropy, last epoch
  double val_top8 = 0.0;    // target within the 8 most probable bins
  int train_samples = 0;
  int val_samples = 0;
};

// Supervised training on kept-frame windows of the base records; the target
// is the binned bearing of each frame's label waypoint.
DirectionClassifier train_direction_classifier(const expert::Dataset& ds,
                                               const ClassifierConfig& cfg,
                                               ClassifierReport* report = nullptr);

// dispersion of the predicted direction at the end of a window
double directional_variance(const DirectionClassifier& clf,
                            const std::vector<sim::Observation>& window);

}  // namespace bnav::map
