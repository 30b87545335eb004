#include "bnav/map/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bnav/binio.hpp"
#include "bnav/nn/model.hpp"
#include "bnav/threading.hpp"

namespace bnav::map {

namespace {
constexpr double kBinWidth = 2.0 * M_PI / kDirBins;
}

int bin_of_bearing(double theta) {
  double t = wrap_angle(theta);
  int b = static_cast<int>(std::floor((t + M_PI) / kBinWidth + 0.5));
  return ((b % kDirBins) + kDirBins) % kDirBins;
}

double bin_center(int bin) { return -M_PI + bin * kBinWidth; }

double circular_variance(const std::vector<float>& p) {
  double cx = 0.0, sx = 0.0;
  for (size_t b = 0; b < p.size(); ++b) {
    double th = bin_center(static_cast<int>(b));
    cx += p[b] * std::cos(th);
    sx += p[b] * std::sin(th);
  }
  return 1.0 - std::hypot(cx, sx);
}

DirectionClassifier::DirectionClassifier(int k, const ClassifierDims& dims,
                                         uint64_t seed)
    : k_(k), d_(dims) {
  if (k < 1) throw DatasetError("classifier window must be positive");
  in_fc_.build(ps_, "dir.in", 2 * d_.rays, d_.feat);
  gru_.build(ps_, "dir.gru", d_.feat, d_.hidden);
  head_.build(ps_, "dir.head", d_.hidden, kDirBins);
  ps_.init_uniform(seed);
}

struct DirectionClassifier::Cache {
  std::vector<std::vector<float>> x, e, h;
  std::vector<nn::Gru<float>::StepCache> gru;
};

void DirectionClassifier::forward(const std::vector<const sim::Observation*>& w,
                                  std::vector<float>* p, Cache* c) const {
  if (w.empty()) throw DatasetError("empty classifier window");
  if (c) {
    c->x.resize(static_cast<size_t>(k_));
    c->e.resize(static_cast<size_t>(k_));
    c->h.resize(static_cast<size_t>(k_));
    c->gru.resize(static_cast<size_t>(k_));
  }
  std::vector<float> h(static_cast<size_t>(d_.hidden), 0.0f);
  for (int t = 0; t < k_; ++t) {
    // short windows repeat the first frame; long ones keep the last k
    int src = static_cast<int>(w.size()) - k_ + t;
    const sim::Observation& o = *w[static_cast<size_t>(std::max(0, src))];
    std::vector<float> x(static_cast<size_t>(2 * d_.rays));
    for (int i = 0; i < d_.rays; ++i) {
      x[static_cast<size_t>(i)] =
          static_cast<float>(o.depth[static_cast<size_t>(i)] / sim::kMaxRange);
      x[static_cast<size_t>(d_.rays + i)] =
          static_cast<float>(o.appearance[static_cast<size_t>(i)]);
    }
    std::vector<float> e(static_cast<size_t>(d_.feat), 0.0f);
    in_fc_.forward(ps_, x.data(), e.data());
    nn::tanh_forward(e.data(), d_.feat);
    std::vector<float> h_new(static_cast<size_t>(d_.hidden));
    gru_.step(ps_, e.data(), h.data(), h_new.data(),
              c ? &c->gru[static_cast<size_t>(t)] : nullptr);
    h = std::move(h_new);
    if (c) {
      c->x[static_cast<size_t>(t)] = std::move(x);
      c->e[static_cast<size_t>(t)] = std::move(e);
      c->h[static_cast<size_t>(t)] = h;
    }
  }
  std::vector<float> logits(static_cast<size_t>(kDirBins));
  head_.forward(ps_, h.data(), logits.data());
  float mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  p->resize(static_cast<size_t>(kDirBins));
  for (int b = 0; b < kDirBins; ++b) {
    double ex = std::exp(static_cast<double>(logits[static_cast<size_t>(b)] - mx));
    (*p)[static_cast<size_t>(b)] = static_cast<float>(ex);
    sum += ex;
  }
  for (float& v : *p) v = static_cast<float>(v / sum);
}

std::vector<float> DirectionClassifier::predict_ptrs(
    const std::vector<const sim::Observation*>& w) const {
  std::vector<float> p;
  forward(w, &p, nullptr);
  return p;
}

std::vector<float> DirectionClassifier::predict(
    const std::vector<sim::Observation>& window) const {
  std::vector<const sim::Observation*> w;
  w.reserve(window.size());
  for (const auto& o : window) w.push_back(&o);
  return predict_ptrs(w);
}

double DirectionClassifier::sample_grad(const std::vector<const sim::Observation*>& w,
                                        int target, nn::Grads<float>* g) const {
  std::vector<float> p;
  Cache c;
  forward(w, &p, &c);
  double loss = -std::log(std::max(1e-12, static_cast<double>(p[static_cast<size_t>(target)])));
  if (!g) return loss;

  std::vector<float> dlogits = p;
  dlogits[static_cast<size_t>(target)] -= 1.0f;
  std::vector<float> dh(static_cast<size_t>(d_.hidden), 0.0f);
  head_.backward(ps_, c.h.back().data(), dlogits.data(), *g, dh.data());
  for (int t = k_ - 1; t >= 0; --t) {
    std::vector<float> de(static_cast<size_t>(d_.feat), 0.0f);
    std::vector<float> dh_prev(static_cast<size_t>(d_.hidden), 0.0f);
    gru_.backward_step(ps_, c.gru[static_cast<size_t>(t)], dh.data(), *g, de.data(),
                       dh_prev.data());
    dh = std::move(dh_prev);
    nn::tanh_backward(c.e[static_cast<size_t>(t)].data(), de.data(), d_.feat);
    in_fc_.backward(ps_, c.x[static_cast<size_t>(t)].data(), de.data(), *g, nullptr);
  }
  return loss;
}

void DirectionClassifier::save(const std::string& path) const {
  BinWriter out(path);
  out.put_string("BNAVDIR1");
  out.put<int32_t>(k_);
  out.put<int32_t>(d_.rays);
  out.put<int32_t>(d_.feat);
  out.put<int32_t>(d_.hidden);
  nn::write_tensors(out, ps_);
  out.check();
}

DirectionClassifier DirectionClassifier::load(const std::string& path) {
  BinReader in(path);
  if (in.get_string() != "BNAVDIR1") throw IoError("bad classifier magic: " + path);
  int k = in.get<int32_t>();
  ClassifierDims d;
  d.rays = in.get<int32_t>();
  d.feat = in.get<int32_t>();
  d.hidden = in.get<int32_t>();
  DirectionClassifier clf(k, d);
  nn::read_tensors(in, &clf.ps_);
  return clf;
}

double directional_variance(const DirectionClassifier& clf,
                            const std::vector<sim::Observation>& window) {
  return circular_variance(clf.predict(window));
}

namespace {

struct SampleRef {
  int rec;
  int t;
  int target;
};

std::vector<const sim::Observation*> window_ptrs(
    const std::vector<expert::KeptFrame>& kept, int t, int k) {
  std::vector<const sim::Observation*> w;
  w.reserve(static_cast<size_t>(k));
  for (int j = t - k + 1; j <= t; ++j)
    w.push_back(&kept[static_cast<size_t>(std::max(0, j))].obs);
  return w;
}

}  // namespace

DirectionClassifier train_direction_classifier(const expert::Dataset& ds,
                                               const ClassifierConfig& cfg,
                                               ClassifierReport* report) {
  // one sample per kept frame, labeled with its own waypoint bearing
  std::vector<SampleRef> samples;
  for (size_t r = 0; r < ds.records.size(); ++r) {
    const expert::TrainRecord& rec = ds.records[r];
    if (rec.encoder_source >= 0) continue;
    int K = static_cast<int>(rec.kept.size());
    for (int t = 0; t < K; ++t) {
      int w = std::min(t + expert::kWaypointLookahead, K - 1);
      Vec2 wp = rec.kept[static_cast<size_t>(t)].pose.to_frame(
          rec.kept[static_cast<size_t>(w)].pose.position());
      if (std::hypot(wp.x, wp.y) < 1e-9) continue;  // degenerate near the end
      samples.push_back(SampleRef{static_cast<int>(r), t,
                                  bin_of_bearing(std::atan2(wp.y, wp.x))});
    }
  }
  if (samples.size() < 4) throw DatasetError("too few classifier samples");

  Rng root(mix64(cfg.seed, 0xd17c));
  for (size_t i = samples.size(); i > 1; --i)
    std::swap(samples[i - 1], samples[root.uniform_int(i)]);

  size_t n_val = std::clamp<size_t>(
      static_cast<size_t>(std::lround(cfg.val_fraction * samples.size())), 1,
      samples.size() - 1);
  std::vector<SampleRef> val(samples.begin(), samples.begin() + static_cast<long>(n_val));
  std::vector<SampleRef> train(samples.begin() + static_cast<long>(n_val), samples.end());

  DirectionClassifier clf(cfg.k, cfg.dims, mix64(cfg.seed, 0xc1f));
  nn::Adam<float> opt(clf.params(), cfg.lr);

  std::vector<nn::Grads<float>> slots(static_cast<size_t>(cfg.batch));
  for (auto& s : slots) s = clf.params().make_grads();
  nn::Grads<float> total = clf.params().make_grads();
  std::vector<double> losses(static_cast<size_t>(cfg.batch));

  double last_epoch_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.set_lr(cfg.lr * std::pow(cfg.lr_decay, epoch));
    Rng erng(mix64(cfg.seed, 0xe60 + static_cast<uint64_t>(epoch)));
    for (size_t i = train.size(); i > 1; --i)
      std::swap(train[i - 1], train[erng.uniform_int(i)]);

    double epoch_loss = 0.0;
    size_t batches = 0;
    for (size_t off = 0; off < train.size(); off += static_cast<size_t>(cfg.batch)) {
      int items = static_cast<int>(std::min<size_t>(static_cast<size_t>(cfg.batch),
                                                    train.size() - off));
      parallel_for(items, [&](int64_t i) {
        auto& g = slots[static_cast<size_t>(i)];
        for (auto& t : g) std::fill(t.begin(), t.end(), 0.0f);
        const SampleRef& s = train[off + static_cast<size_t>(i)];
        auto w = window_ptrs(ds.records[static_cast<size_t>(s.rec)].kept, s.t,
                             clf.window());
        losses[static_cast<size_t>(i)] = clf.sample_grad(w, s.target, &g);
      });
      for (auto& t : total) std::fill(t.begin(), t.end(), 0.0f);
      double batch_loss = 0.0;
      for (int i = 0; i < items; ++i) {  // fixed order: worker-count invariant
        batch_loss += losses[static_cast<size_t>(i)];
        for (size_t ti = 0; ti < total.size(); ++ti) {
          const auto& src = slots[static_cast<size_t>(i)][ti];
          auto& dst = total[ti];
          for (size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
      }
      batch_loss /= items;
      for (auto& t : total)
        for (float& v : t) v /= static_cast<float>(items);
      if (!std::isfinite(batch_loss))
        throw DivergenceError("classifier loss is not finite");
      opt.step(clf.params(), total);
      epoch_loss += batch_loss;
      ++batches;
    }
    last_epoch_loss = batches ? epoch_loss / static_cast<double>(batches) : 0.0;
  }

  if (report) {
    report->train_loss = last_epoch_loss;
    report->train_samples = static_cast<int>(train.size());
    report->val_samples = static_cast<int>(val.size());
    std::vector<uint8_t> hit(val.size(), 0);
    parallel_for(static_cast<int64_t>(val.size()), [&](int64_t i) {
      const SampleRef& s = val[static_cast<size_t>(i)];
      auto w = window_ptrs(ds.records[static_cast<size_t>(s.rec)].kept, s.t,
                           clf.window());
      std::vector<float> p = clf.predict_ptrs(w);
      std::vector<int> idx(p.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::partial_sort(idx.begin(), idx.begin() + 8, idx.end(), [&](int a, int b) {
        if (p[static_cast<size_t>(a)] != p[static_cast<size_t>(b)])
          return p[static_cast<size_t>(a)] > p[static_cast<size_t>(b)];
        return a < b;
      });
      for (int j = 0; j < 8; ++j)
        if (idx[static_cast<size_t>(j)] == s.target) hit[static_cast<size_t>(i)] = 1;
    });
    int hits = 0;
    for (uint8_t h : hit) hits += h;
    report->val_top8 = val.empty() ? 0.0 : static_cast<double>(hits) / val.size();
  }
  return clf;
}

}  // namespace bnav::map
