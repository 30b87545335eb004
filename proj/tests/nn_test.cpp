#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "bnav/common.hpp"
#include "bnav/nn/model.hpp"
#include "bnav/threading.hpp"
#include "bnav/train/trainer.hpp"

using namespace bnav;
using namespace bnav::nn;
using expert::Dataset;
using expert::KeptFrame;
using expert::QueryFrame;
using expert::TrainRecord;

namespace {

// small double-precision configuration for finite-difference checks
ModelDims tiny_dims() {
  ModelDims d;
  d.rays = 16;
  d.conv_ch = 3;
  d.obs_feat = 12;
  d.proj = 6;
  d.rel = 8;
  d.z = 4;
  d.enc_in = 6;
  d.hidden = 7;
  return d;
}

sim::Observation synth_obs(uint64_t tag) {
  sim::Observation o;
  Rng rng(mix64(tag, 0x0b5));
  for (int i = 0; i < sim::kNumRays; ++i) {
    o.depth[static_cast<size_t>(i)] = static_cast<float>(rng.uniform(0.3, 5.0));
    o.appearance[static_cast<size_t>(i)] = static_cast<float>(rng.uniform(0.0, 1.0));
  }
  return o;
}

TrainRecord synth_base(uint64_t tag, int frames) {
  TrainRecord rec;
  Rng rng(mix64(tag, 0xba5e));
  double cum = 0.0;
  for (int t = 0; t < frames; ++t) {
    KeptFrame k;
    k.src_index = 2 * t;
    k.pose = Pose{0.4 * t, 0.1, 0.0};
    k.obs = synth_obs(tag * 100 + static_cast<uint64_t>(t));
    if (t > 0) cum += 0.4;
    k.cum_len = cum;
    rec.kept.push_back(k);

    QueryFrame q;
    q.pose = k.pose;
    q.obs = synth_obs(tag * 100 + 50 + static_cast<uint64_t>(t));
    q.wp_x = static_cast<float>(rng.uniform(-1.0, 1.0));
    q.wp_y = static_cast<float>(rng.uniform(-1.0, 1.0));
    q.phi = static_cast<float>(rng.uniform(0.0, 1.0));
    rec.exec.push_back(q);
  }
  rec.total_len = cum;
  rec.goal = rec.kept.back().pose.position();
  return rec;
}

TrainRecord synth_relabeled(uint64_t tag, int steps, int source) {
  TrainRecord rec;
  rec.encoder_source = source;
  Rng rng(mix64(tag, 0xd49));
  for (int t = 0; t < steps; ++t) {
    QueryFrame q;
    q.pose = Pose{0.2 * t, 0.0, 0.1};
    q.obs = synth_obs(tag * 100 + 70 + static_cast<uint64_t>(t));
    q.wp_x = static_cast<float>(rng.uniform(-1.0, 1.0));
    q.wp_y = static_cast<float>(rng.uniform(-1.0, 1.0));
    q.phi = static_cast<float>(rng.uniform(0.0, 1.0));
    rec.exec.push_back(q);
  }
  return rec;
}

}  // namespace

TEST_CASE("analytic gradients match finite differences") {
  CbeModel<double> model(tiny_dims(), 42);
  std::vector<TrainRecord> all{synth_base(1, 5), synth_relabeled(2, 7, 0)};

  for (size_t ri = 0; ri < all.size(); ++ri) {
    Grads<double> g = model.params().make_grads();
    model.record_grad(all[ri], all, 1.0, &g);

    auto& ps = model.params();
    int checked = 0;
    for (size_t ti = 0; ti < ps.tensors().size(); ++ti) {
      size_t n = ps.at(static_cast<int>(ti)).size();
      for (size_t k : {static_cast<size_t>(0), n / 2}) {
        double* p = &ps.at(static_cast<int>(ti)).v[k];
        double orig = *p;
        double h = 1e-6;
        *p = orig + h;
        double lp = model.record_grad(all[ri], all, 1.0, nullptr).loss;
        *p = orig - h;
        double lm = model.record_grad(all[ri], all, 1.0, nullptr).loss;
        *p = orig;
        double num = (lp - lm) / (2.0 * h);
        double ana = g[ti][k];
        double denom = std::max(1e-8, std::abs(num) + std::abs(ana));
        CHECK(std::abs(num - ana) / denom < 1e-4);
        ++checked;
      }
    }
    CHECK(checked >= 40);  // both halves of every tensor in both record kinds
  }
}

TEST_CASE("training forward equals the runtime incremental path") {
  CbeModel<double> model(tiny_dims(), 9);
  std::vector<TrainRecord> all{synth_base(3, 6)};
  const TrainRecord& rec = all[0];

  // replicate the teacher-forced forward with the public runtime API
  auto es = model.encoder_begin();
  std::vector<std::vector<double>> zs;
  for (const KeptFrame& k : rec.kept) zs.push_back(model.encoder_push(es, k.obs));
  std::vector<double> z_demo = zs.back();
  std::vector<double> A_start = model.obs_features(rec.kept.front().obs);
  std::vector<double> A_goal = model.obs_features(rec.kept.back().obs);
  std::vector<double> p_start = model.proj_features(A_start);
  std::vector<double> p_goal = model.proj_features(A_goal);

  auto gs = model.generator_begin();
  double loss = 0.0;
  for (size_t t = 0; t < rec.exec.size(); ++t) {
    std::vector<double> A_cur = model.obs_features(rec.exec[t].obs);
    std::vector<double> pc = model.proj_features(A_cur);
    auto out = model.generator_push(gs, z_demo, zs[t],
                                    model.relation_from_proj(pc, p_start),
                                    model.relation_from_proj(pc, p_goal));
    double ex = out.wp_x - rec.exec[t].wp_x;
    double ey = out.wp_y - rec.exec[t].wp_y;
    double ep = out.phi - rec.exec[t].phi;
    loss += ex * ex + ey * ey + ep * ep;
  }
  loss /= static_cast<double>(rec.exec.size());

  double trained = model.record_grad(rec, all, 1.0, nullptr).loss;
  CHECK(loss == doctest::Approx(trained).epsilon(1e-12));
}

TEST_CASE("embedding interfaces carry the documented widths") {
  CbeModel<float> model(ModelDims{}, 3);
  CHECK(model.num_params() == 653251);

  sim::Observation o = synth_obs(5);
  std::vector<float> A = model.obs_features(o);
  CHECK(A.size() == 800);
  std::vector<float> r = model.relation(A, A);
  CHECK(r.size() == 128);
  std::vector<float> z = model.encode_demo({o, synth_obs(6), synth_obs(7)});
  CHECK(z.size() == 32);
  for (float x : z) {
    CHECK(x >= -1.0f);
    CHECK(x <= 1.0f);
  }
}

TEST_CASE("checkpoint round trip is bit exact and validates shapes") {
  CbeModel<float> a(ModelDims{}, 21);
  auto path = (std::filesystem::temp_directory_path() / "bnav_ckpt_rt.bin").string();
  save_checkpoint(path, a.params());

  CbeModel<float> b(ModelDims{}, 99);  // different init must be overwritten
  load_checkpoint(path, &b.params());
  for (size_t ti = 0; ti < a.params().tensors().size(); ++ti) {
    const auto& ta = a.params().at(static_cast<int>(ti));
    const auto& tb = b.params().at(static_cast<int>(ti));
    CHECK(ta.v == tb.v);  // bitwise equality of float vectors
  }

  ModelDims other;
  other.hidden = 64;
  CbeModel<float> c(other, 1);
  CHECK_THROWS_AS(load_checkpoint(path, &c.params()), IoError);
  std::filesystem::remove(path);
}

namespace {

ModelDims small_float_dims() {
  ModelDims d;
  d.conv_ch = 8;
  d.obs_feat = 64;
  d.proj = 16;
  d.rel = 24;
  d.z = 8;
  d.enc_in = 24;
  d.hidden = 24;
  return d;
}

Dataset synth_dataset(int records, int frames) {
  Dataset ds;
  ds.worlds.push_back(sim::World::from_ascii(
      "########\n#......#\n#......#\n#......#\n########\n", 1));
  for (int r = 0; r < records; ++r)
    ds.records.push_back(synth_base(100 + static_cast<uint64_t>(r), frames));
  return ds;
}

}  // namespace

TEST_CASE("a couple of records can be memorized") {
  CbeModel<float> model(small_float_dims(), 7);
  Dataset ds = synth_dataset(2, 6);
  train::TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch = 2;
  cfg.lr = 3e-3;
  cfg.lr_decay = 1.0;
  cfg.seed = 4;
  train::Trainer tr(&model, cfg);
  double first = tr.run_epoch(ds, 0).loss;
  double last = 0.0;
  for (int e = 1; e < cfg.epochs; ++e) last = tr.run_epoch(ds, e).loss;
  CHECK(last < first / 5.0);
}

TEST_CASE("training is bit-identical for serial and parallel schedules") {
  Dataset ds = synth_dataset(7, 5);
  train::TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch = 3;
  cfg.seed = 11;

  auto run = [&](bool par) {
    threading::set_parallel(par);
    CbeModel<float> model(small_float_dims(), 13);
    train::Trainer tr(&model, cfg);
    tr.fit(ds);
    std::vector<float> flat;
    for (const auto& t : model.params().tensors())
      flat.insert(flat.end(), t.v.begin(), t.v.end());
    return flat;
  };
  auto serial = run(false);
  auto parallel = run(true);
  threading::set_parallel(true);
  CHECK(serial == parallel);
}

TEST_CASE("learning rate decays per epoch") {
  CbeModel<float> model(small_float_dims(), 7);
  Dataset ds = synth_dataset(2, 4);
  train::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.lr = 1e-3;
  cfg.lr_decay = 0.7;
  train::Trainer tr(&model, cfg);
  auto hist = tr.fit(ds);
  REQUIRE(hist.size() == 3);
  CHECK(hist[0].lr == doctest::Approx(1e-3));
  CHECK(hist[1].lr == doctest::Approx(7e-4));
  CHECK(hist[2].lr == doctest::Approx(4.9e-4));
}

TEST_CASE("poisoned parameters raise a divergence error") {
  CbeModel<float> model(small_float_dims(), 7);
  model.params().at(0).v[0] = std::numeric_limits<float>::quiet_NaN();
  Dataset ds = synth_dataset(2, 4);
  train::TrainConfig cfg;
  cfg.epochs = 1;
  train::Trainer tr(&model, cfg);
  CHECK_THROWS_AS(tr.run_epoch(ds, 0), DivergenceError);
}

TEST_CASE("base records reject mismatched query counts") {
  CbeModel<float> model(small_float_dims(), 7);
  std::vector<TrainRecord> all{synth_base(4, 5)};
  all[0].exec.pop_back();
  CHECK_THROWS_AS(model.record_grad(all[0], all, 1.0, nullptr), DatasetError);
}
