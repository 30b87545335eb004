#pragma once

#include <vector>

#include "bnav/expert/dataset.hpp"
#include "bnav/nn/model.hpp"

namespace bnav::train {

struct TrainConfig {
  int epochs = 6;
  int batch = 16;
  double lr = 3e-4;
  double lr_decay = 0.7;   // per epoch
  double lambda = 1.0;     // progress loss weight
  uint64_t seed = 5;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double wp_se = 0.0;
  double phi_se = 0.0;
  double lr = 0.0;
};

// Minibatch Adam over teacher-forced records. Per-record gradients are
// computed in parallel into private buffers and reduced in record order, so
// results are bit-identical for any worker count.
class Trainer {
 public:
  Trainer(nn::CbeModel<float>* model, const TrainConfig& cfg);

  EpochStats run_epoch(const expert::Dataset& ds, int epoch_index);
  std::vector<EpochStats> fit(const expert::Dataset& ds);

  // evaluation-only mean loss over all records
  EpochStats evaluate(const expert::Dataset& ds) const;

  nn::Adam<float>& opt() { return opt_; }

 private:
  nn::CbeModel<float>* model_;
  TrainConfig cfg_;
  nn::Adam<float> opt_;
  std::vector<nn::Grads<float>> slots_;
  nn::Grads<float> total_;
};

struct DaggerConfig {
  int iterations = 2;
  double fraction = 0.25;     // of the base record count, per iteration
  int epochs_per_iter = 2;
  double budget_factor = 2.0;
  double noise_scale = 0.1;   // actuation noise during collection
  int min_steps = 8;          // drop shorter rollout prefixes
  uint64_t seed = 17;
};

// One relabeling round: roll out the current policy on a sample of base
// demos, label the visited states against the base kept frames, and append
// the streams as new records (encoder_source -> base index).
int collect_relabeled_records(const nn::CbeModel<float>& model,
                              expert::Dataset* ds, const DaggerConfig& cfg,
                              int iteration);

// full loop: initial fit, then alternating collection and refinement
std::vector<EpochStats> train_with_relabeling(nn::CbeModel<float>* model,
                                              expert::Dataset* ds,
                                              const TrainConfig& tcfg,
                                              const DaggerConfig& dcfg);

}  // namespace bnav::train
