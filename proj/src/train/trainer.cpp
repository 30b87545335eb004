#include "bnav/train/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "bnav/exec/executor.hpp"
#include "bnav/threading.hpp"

namespace bnav::train {

using expert::Dataset;
using expert::TrainRecord;

Trainer::Trainer(nn::CbeModel<float>* model, const TrainConfig& cfg)
    : model_(model), cfg_(cfg), opt_(model->params(), cfg.lr) {
  slots_.resize(static_cast<size_t>(cfg_.batch));
  for (auto& s : slots_) s = model_->params().make_grads();
  total_ = model_->params().make_grads();
}

EpochStats Trainer::run_epoch(const Dataset& ds, int epoch_index) {
  if (ds.records.empty()) throw DatasetError("cannot train on an empty dataset");
  size_t n = ds.records.size();
  std::vector<int> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  Rng shuffle(mix64(cfg_.seed, 0xe90c + static_cast<uint64_t>(epoch_index)));
  for (size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[shuffle.uniform_int(i)]);

  EpochStats stats;
  stats.epoch = epoch_index;
  stats.lr = opt_.lr();
  size_t seen = 0;
  for (size_t off = 0; off < n; off += static_cast<size_t>(cfg_.batch)) {
    size_t b = std::min(static_cast<size_t>(cfg_.batch), n - off);
    std::vector<nn::CbeModel<float>::RecordStats> rs(b);
    parallel_for(static_cast<int64_t>(b), [&](int64_t i) {
      auto& slot = slots_[static_cast<size_t>(i)];
      for (auto& t : slot) std::fill(t.begin(), t.end(), 0.0f);
      rs[static_cast<size_t>(i)] = model_->record_grad(
          ds.records[static_cast<size_t>(order[off + static_cast<size_t>(i)])],
          ds.records, cfg_.lambda, &slot);
    });

    // ordered reduction keeps the sum independent of scheduling
    for (auto& t : total_) std::fill(t.begin(), t.end(), 0.0f);
    for (size_t r = 0; r < b; ++r)
      for (size_t ti = 0; ti < total_.size(); ++ti) {
        const float* src = slots_[r][ti].data();
        float* dst = total_[ti].data();
        for (size_t k = 0; k < total_[ti].size(); ++k) dst[k] += src[k];
      }
    float inv = 1.0f / static_cast<float>(b);
    for (auto& t : total_)
      for (float& x : t) x *= inv;

    double batch_loss = 0.0;
    for (const auto& s : rs) {
      batch_loss += s.loss;
      stats.loss += s.loss;
      stats.wp_se += s.wp_se;
      stats.phi_se += s.phi_se;
    }
    if (!std::isfinite(batch_loss))
      throw DivergenceError("non-finite loss in epoch " + std::to_string(epoch_index));
    seen += b;
    opt_.step(model_->params(), total_);
  }
  stats.loss /= static_cast<double>(seen);
  stats.wp_se /= static_cast<double>(seen);
  stats.phi_se /= static_cast<double>(seen);
  return stats;
}

std::vector<EpochStats> Trainer::fit(const Dataset& ds) {
  std::vector<EpochStats> out;
  for (int e = 0; e < cfg_.epochs; ++e) {
    opt_.set_lr(cfg_.lr * std::pow(cfg_.lr_decay, e));
    out.push_back(run_epoch(ds, e));
  }
  return out;
}

EpochStats Trainer::evaluate(const Dataset& ds) const {
  EpochStats stats;
  size_t n = ds.records.size();
  std::vector<nn::CbeModel<float>::RecordStats> rs(n);
  parallel_for(static_cast<int64_t>(n), [&](int64_t i) {
    rs[static_cast<size_t>(i)] = model_->record_grad(
        ds.records[static_cast<size_t>(i)], ds.records, cfg_.lambda, nullptr);
  });
  for (const auto& s : rs) {
    stats.loss += s.loss;
    stats.wp_se += s.wp_se;
    stats.phi_se += s.phi_se;
  }
  stats.loss /= static_cast<double>(n);
  stats.wp_se /= static_cast<double>(n);
  stats.phi_se /= static_cast<double>(n);
  return stats;
}

int collect_relabeled_records(const nn::CbeModel<float>& model, Dataset* ds,
                              const DaggerConfig& cfg, int iteration) {
  // base records only; relabeled ones never spawn further rollouts
  std::vector<int> base;
  for (size_t i = 0; i < ds->records.size(); ++i)
    if (ds->records[i].encoder_source < 0) base.push_back(static_cast<int>(i));
  int want = std::max(1, static_cast<int>(std::lround(cfg.fraction * base.size())));

  Rng rng(mix64(cfg.seed, 0xda6 + static_cast<uint64_t>(iteration)));
  for (size_t i = base.size(); i > 1; --i)
    std::swap(base[i - 1], base[rng.uniform_int(i)]);
  base.resize(std::min(base.size(), static_cast<size_t>(want)));
  std::sort(base.begin(), base.end());  // deterministic append order

  std::vector<TrainRecord> slots(base.size());
  std::vector<uint8_t> ok(base.size(), 0);
  exec::ExecParams ep;
  ep.budget_factor = cfg.budget_factor;
  ep.noise_scale = cfg.noise_scale;

  parallel_for(static_cast<int64_t>(base.size()), [&](int64_t i) {
    const TrainRecord& src = ds->records[static_cast<size_t>(base[static_cast<size_t>(i)])];
    const sim::World& world = ds->worlds[static_cast<size_t>(src.world_index)];
    std::vector<sim::Observation> frames;
    for (const auto& k : src.kept) frames.push_back(k.obs);
    std::vector<float> z = model.encode_demo(frames);
    std::vector<float> A_s = model.obs_features(src.kept.front().obs);
    std::vector<float> A_g = model.obs_features(src.kept.back().obs);
    int nominal = src.kept.back().src_index - src.kept.front().src_index + 1;
    int budget = std::max(20, static_cast<int>(std::lround(cfg.budget_factor * nominal)));

    Rng sub = rng.fork(0x52c + static_cast<uint64_t>(i));
    exec::RolloutLog log;
    exec::execute_behavior(world, model, z, A_s, A_g, src.kept.front().pose,
                           budget, ep, sub, &log);
    if (static_cast<int>(log.poses.size()) < cfg.min_steps) return;

    TrainRecord rec;
    rec.encoder_source = base[static_cast<size_t>(i)];
    rec.world_index = src.world_index;
    rec.goal = src.goal;
    rec.total_len = src.total_len;
    rec.exec.reserve(log.poses.size());
    for (size_t t = 0; t < log.poses.size(); ++t) {
      expert::Labels lb = expert::compute_labels(src.kept, log.poses[t]);
      rec.exec.push_back(expert::QueryFrame{log.poses[t], log.obs[t],
                                            static_cast<float>(lb.wp_x),
                                            static_cast<float>(lb.wp_y),
                                            static_cast<float>(lb.phi)});
    }
    slots[static_cast<size_t>(i)] = std::move(rec);
    ok[static_cast<size_t>(i)] = 1;
  });

  int added = 0;
  for (size_t i = 0; i < slots.size(); ++i)
    if (ok[i]) {
      ds->records.push_back(std::move(slots[i]));
      ++added;
    }
  return added;
}

std::vector<EpochStats> train_with_relabeling(nn::CbeModel<float>* model,
                                              Dataset* ds, const TrainConfig& tcfg,
                                              const DaggerConfig& dcfg) {
  Trainer trainer(model, tcfg);
  std::vector<EpochStats> history = trainer.fit(*ds);
  int epoch = tcfg.epochs;
  for (int it = 0; it < dcfg.iterations; ++it) {
    collect_relabeled_records(*model, ds, dcfg, it);
    for (int e = 0; e < dcfg.epochs_per_iter; ++e, ++epoch) {
      trainer.opt().set_lr(tcfg.lr * std::pow(tcfg.lr_decay, epoch));
      history.push_back(trainer.run_epoch(*ds, epoch));
    }
  }
  return history;
}

}  // namespace bnav::train
