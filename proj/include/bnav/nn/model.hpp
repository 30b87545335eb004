#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "bnav/expert/dataset.hpp"
#include "bnav/nn/layers.hpp"
#include "bnav/nn/tensor.hpp"
#include "bnav/sim/sensor.hpp"

namespace bnav::nn {

// Network widths. Defaults are the production configuration; gradient-check
// tests shrink everything and switch T to double.
struct ModelDims {
  int rays = 64;      // panorama width
  int conv_ch = 16;
  int obs_feat = 800; // attractor feature size
  int proj = 64;      // relation projection per side
  int rel = 128;      // relation feature size
  int z = 32;         // behavior embedding size
  int enc_in = 128;   // encoder GRU input
  int hidden = 128;   // GRU hidden, encoder and generator
};

// Embedding model: a shared observation feature stack, a demonstration
// encoder GRU producing 32-d behavior embeddings, a relation head comparing
// current features against the start/goal attractor features, and a
// generator GRU emitting body-frame waypoints plus a progress estimate.
template <typename T>
class CbeModel {
 public:
  explicit CbeModel(const ModelDims& dims = {}, uint64_t seed = 1) : d_(dims) {
    conv1_.build(ps_, "obs.conv1", 2, d_.conv_ch, 5, 2, 2, d_.rays);
    conv2_.build(ps_, "obs.conv2", d_.conv_ch, d_.conv_ch, 3, 2, 1, conv1_.len_out);
    obs_fc_.build(ps_, "obs.fc", d_.conv_ch * conv2_.len_out, d_.obs_feat);
    rel_proj_.build(ps_, "rel.proj", d_.obs_feat, d_.proj);
    rel_fc_.build(ps_, "rel.fc", 2 * d_.proj, d_.rel);
    enc_in_.build(ps_, "enc.in", d_.obs_feat, d_.enc_in);
    enc_gru_.build(ps_, "enc.gru", d_.enc_in, d_.hidden);
    z_proj_.build(ps_, "enc.zproj", d_.hidden, d_.z);
    gen_gru_.build(ps_, "gen.gru", 2 * d_.z + 2 * d_.rel, d_.hidden);
    wp_head_.build(ps_, "gen.wp", d_.hidden, 2);
    phi_head_.build(ps_, "gen.phi", d_.hidden, 1);
    ps_.init_uniform(seed);
  }

  const ModelDims& dims() const { return d_; }
  ParamStore<T>& params() { return ps_; }
  const ParamStore<T>& params() const { return ps_; }
  size_t num_params() const { return ps_.total_params(); }

  // ---- observation features ----

  // [depth / max_range ; appearance], channel-major
  std::vector<T> obs_input(const sim::Observation& o) const {
    std::vector<T> x(static_cast<size_t>(2 * d_.rays));
    for (int i = 0; i < d_.rays; ++i) {
      x[static_cast<size_t>(i)] = static_cast<T>(o.depth[static_cast<size_t>(i)] /
                                                 sim::kMaxRange);
      x[static_cast<size_t>(d_.rays + i)] =
          static_cast<T>(o.appearance[static_cast<size_t>(i)]);
    }
    return x;
  }

  std::vector<T> obs_features(const sim::Observation& o) const {
    ObsCache c;
    obs_forward(obs_input(o), &c);
    return std::move(c.A);
  }

  // tanh(P * A): precompute per stored attractor, reuse across queries
  std::vector<T> proj_features(const std::vector<T>& A) const {
    std::vector<T> p(static_cast<size_t>(d_.proj));
    rel_proj_.forward(ps_, A.data(), p.data());
    tanh_forward(p.data(), d_.proj);
    return p;
  }

  std::vector<T> relation_from_proj(const std::vector<T>& p_cur,
                                    const std::vector<T>& p_ref) const {
    std::vector<T> cat(static_cast<size_t>(2 * d_.proj));
    std::copy(p_cur.begin(), p_cur.end(), cat.begin());
    std::copy(p_ref.begin(), p_ref.end(), cat.begin() + d_.proj);
    std::vector<T> r(static_cast<size_t>(d_.rel));
    rel_fc_.forward(ps_, cat.data(), r.data());
    tanh_forward(r.data(), d_.rel);
    return r;
  }

  std::vector<T> relation(const std::vector<T>& A_cur, const std::vector<T>& A_ref) const {
    return relation_from_proj(proj_features(A_cur), proj_features(A_ref));
  }

  // ---- incremental encoder ----

  struct EncState {
    std::vector<T> h;
  };

  EncState encoder_begin() const {
    return EncState{std::vector<T>(static_cast<size_t>(d_.hidden), T(0))};
  }

  // consume one observation, return the embedding of the prefix so far
  std::vector<T> encoder_push(EncState& s, const sim::Observation& o) const {
    ObsCache c;
    obs_forward(obs_input(o), &c);
    return encoder_push_features(s, c.A);
  }

  std::vector<T> encoder_push_features(EncState& s, const std::vector<T>& A) const {
    std::vector<T> e(static_cast<size_t>(d_.enc_in));
    enc_in_.forward(ps_, A.data(), e.data());
    tanh_forward(e.data(), d_.enc_in);
    std::vector<T> h_new(static_cast<size_t>(d_.hidden));
    enc_gru_.step(ps_, e.data(), s.h.data(), h_new.data(), nullptr);
    s.h = std::move(h_new);
    std::vector<T> zp(static_cast<size_t>(d_.z));
    z_proj_.forward(ps_, s.h.data(), zp.data());
    tanh_forward(zp.data(), d_.z);
    return zp;
  }

  std::vector<T> encode_demo(const std::vector<sim::Observation>& frames) const {
    if (frames.empty()) throw DatasetError("encode_demo needs at least one frame");
    EncState s = encoder_begin();
    std::vector<T> z;
    for (const auto& o : frames) z = encoder_push(s, o);
    return z;
  }

  // ---- incremental generator ----

  struct GenState {
    std::vector<T> h;
  };

  GenState generator_begin() const {
    return GenState{std::vector<T>(static_cast<size_t>(d_.hidden), T(0))};
  }

  struct GenOut {
    T wp_x, wp_y, phi;
  };

  GenOut generator_push(GenState& s, const std::vector<T>& z_demo,
                        const std::vector<T>& z_exec, const std::vector<T>& r_start,
                        const std::vector<T>& r_goal) const {
    std::vector<T> u = concat_input(z_demo.data(), z_exec.data(),
                                    r_start.data(), r_goal.data());
    std::vector<T> h_new(static_cast<size_t>(d_.hidden));
    gen_gru_.step(ps_, u.data(), s.h.data(), h_new.data(), nullptr);
    s.h = std::move(h_new);
    T wp[2], phi_pre;
    wp_head_.forward(ps_, s.h.data(), wp);
    phi_head_.forward(ps_, s.h.data(), &phi_pre);
    return GenOut{wp[0], wp[1], sigmoid(phi_pre)};
  }

  // ---- teacher-forced training on one record ----

  struct RecordStats {
    double loss = 0.0;
    double wp_se = 0.0;   // mean squared waypoint error, m^2
    double phi_se = 0.0;  // mean squared progress error
    int steps = 0;
  };

  // Forward + backward for one record; grads are accumulated into *g
  // (pass nullptr for evaluation only). Base records pair kept frame t with
  // query t; relabeled records run the encoder over their own 10 Hz stream
  // and borrow the demonstration from their base record.
  RecordStats record_grad(const expert::TrainRecord& rec,
                          const std::vector<expert::TrainRecord>& all,
                          double lambda, Grads<T>* g) const;

 private:
  struct ObsCache {
    std::vector<T> x0, y1, y2, A;
  };

  void obs_forward(std::vector<T> x, ObsCache* c) const {
    c->x0 = std::move(x);
    c->y1.assign(static_cast<size_t>(d_.conv_ch) * conv1_.len_out, T(0));
    conv1_.forward(ps_, c->x0.data(), c->y1.data());
    tanh_forward(c->y1.data(), static_cast<int>(c->y1.size()));
    c->y2.assign(static_cast<size_t>(d_.conv_ch) * conv2_.len_out, T(0));
    conv2_.forward(ps_, c->y1.data(), c->y2.data());
    tanh_forward(c->y2.data(), static_cast<int>(c->y2.size()));
    c->A.assign(static_cast<size_t>(d_.obs_feat), T(0));
    obs_fc_.forward(ps_, c->y2.data(), c->A.data());
    tanh_forward(c->A.data(), d_.obs_feat);
  }

  // dA is consumed (modified in place); input gradient is discarded
  void obs_backward(const ObsCache& c, std::vector<T>& dA, Grads<T>& g) const {
    tanh_backward(c.A.data(), dA.data(), d_.obs_feat);
    std::vector<T> dy2(c.y2.size(), T(0));
    obs_fc_.backward(ps_, c.y2.data(), dA.data(), g, dy2.data());
    tanh_backward(c.y2.data(), dy2.data(), static_cast<int>(dy2.size()));
    std::vector<T> dy1(c.y1.size(), T(0));
    conv2_.backward(ps_, c.y1.data(), dy2.data(), g, dy1.data());
    tanh_backward(c.y1.data(), dy1.data(), static_cast<int>(dy1.size()));
    conv1_.backward(ps_, c.x0.data(), dy1.data(), g, nullptr);
  }

  std::vector<T> concat_input(const T* z_demo, const T* z_exec, const T* r_s,
                              const T* r_g) const {
    std::vector<T> u(static_cast<size_t>(2 * d_.z + 2 * d_.rel));
    T* p = u.data();
    std::copy(z_demo, z_demo + d_.z, p);
    std::copy(z_exec, z_exec + d_.z, p + d_.z);
    std::copy(r_s, r_s + d_.rel, p + 2 * d_.z);
    std::copy(r_g, r_g + d_.rel, p + 2 * d_.z + d_.rel);
    return u;
  }

  ModelDims d_;
  ParamStore<T> ps_;
  Conv1d<T> conv1_, conv2_;
  Linear<T> obs_fc_, rel_proj_, rel_fc_, enc_in_, z_proj_, wp_head_, phi_head_;
  Gru<T> enc_gru_, gen_gru_;
};

template <typename T>
typename CbeModel<T>::RecordStats CbeModel<T>::record_grad(
    const expert::TrainRecord& rec, const std::vector<expert::TrainRecord>& all,
    double lambda, Grads<T>* g) const {
  const bool relabeled = rec.encoder_source >= 0;
  const std::vector<expert::KeptFrame>& demo = rec.demo_frames(all);
  const int K = static_cast<int>(demo.size());
  const int Tq = static_cast<int>(rec.exec.size());
  if (K < 1 || Tq < 1) throw DatasetError("record has no frames");
  if (!relabeled && Tq != static_cast<int>(rec.kept.size()))
    throw DatasetError("base record query/kept length mismatch");

  // --- forward: observation features for the execution stream (queries) ---
  std::vector<ObsCache> q_oc(static_cast<size_t>(Tq));
  for (int t = 0; t < Tq; ++t)
    obs_forward(obs_input(rec.exec[static_cast<size_t>(t)].obs), &q_oc[static_cast<size_t>(t)]);

  // demo frames: for base records the kept frames double as the encoder
  // stream; relabeled records need their own pass over the base demo
  std::vector<ObsCache> demo_oc;
  const std::vector<ObsCache>* enc_stream_oc = nullptr;  // what the encoder consumes
  int Ts = 0;  // encoder stream length
  if (relabeled) {
    demo_oc.resize(static_cast<size_t>(K));
    for (int t = 0; t < K; ++t)
      obs_forward(obs_input(demo[static_cast<size_t>(t)].obs), &demo_oc[static_cast<size_t>(t)]);
    enc_stream_oc = &q_oc;  // prefix embeddings track what was actually seen
    Ts = Tq;
  } else {
    demo_oc.resize(static_cast<size_t>(K));
    for (int t = 0; t < K; ++t)
      obs_forward(obs_input(rec.kept[static_cast<size_t>(t)].obs), &demo_oc[static_cast<size_t>(t)]);
    enc_stream_oc = &demo_oc;
    Ts = K;
  }

  // --- encoder over the stream: prefix embeddings z'_t ---
  auto run_encoder = [&](const std::vector<ObsCache>& oc, int len,
                         std::vector<std::vector<T>>& e_in_cache,
                         std::vector<typename Gru<T>::StepCache>& gru_cache,
                         std::vector<std::vector<T>>& h_seq,
                         std::vector<std::vector<T>>& z_seq) {
    e_in_cache.resize(static_cast<size_t>(len));
    gru_cache.resize(static_cast<size_t>(len));
    h_seq.resize(static_cast<size_t>(len));
    z_seq.resize(static_cast<size_t>(len));
    std::vector<T> h(static_cast<size_t>(d_.hidden), T(0));
    for (int t = 0; t < len; ++t) {
      auto& e = e_in_cache[static_cast<size_t>(t)];
      e.assign(static_cast<size_t>(d_.enc_in), T(0));
      enc_in_.forward(ps_, oc[static_cast<size_t>(t)].A.data(), e.data());
      tanh_forward(e.data(), d_.enc_in);
      std::vector<T> h_new(static_cast<size_t>(d_.hidden));
      enc_gru_.step(ps_, e.data(), h.data(), h_new.data(), &gru_cache[static_cast<size_t>(t)]);
      h = std::move(h_new);
      h_seq[static_cast<size_t>(t)] = h;
      auto& zp = z_seq[static_cast<size_t>(t)];
      zp.assign(static_cast<size_t>(d_.z), T(0));
      z_proj_.forward(ps_, h.data(), zp.data());
      tanh_forward(zp.data(), d_.z);
    }
  };

  std::vector<std::vector<T>> s_ein, s_h, s_z;
  std::vector<typename Gru<T>::StepCache> s_gru;
  run_encoder(*enc_stream_oc, Ts, s_ein, s_gru, s_h, s_z);

  std::vector<std::vector<T>> d_ein, d_h, d_z;
  std::vector<typename Gru<T>::StepCache> d_gru;
  if (relabeled) run_encoder(demo_oc, K, d_ein, d_gru, d_h, d_z);

  const std::vector<T>& z_demo = relabeled ? d_z.back() : s_z.back();

  // --- relation features against the demo endpoints ---
  const std::vector<T>& A_start = demo_oc.front().A;
  const std::vector<T>& A_goal = demo_oc.back().A;
  std::vector<T> p_start = proj_features(A_start);
  std::vector<T> p_goal = proj_features(A_goal);

  std::vector<std::vector<T>> p_cur(static_cast<size_t>(Tq));
  std::vector<std::vector<T>> r_s(static_cast<size_t>(Tq)), r_g(static_cast<size_t>(Tq));
  for (int t = 0; t < Tq; ++t) {
    p_cur[static_cast<size_t>(t)] = proj_features(q_oc[static_cast<size_t>(t)].A);
    r_s[static_cast<size_t>(t)] = relation_from_proj(p_cur[static_cast<size_t>(t)], p_start);
    r_g[static_cast<size_t>(t)] = relation_from_proj(p_cur[static_cast<size_t>(t)], p_goal);
  }

  // --- generator over the queries ---
  std::vector<typename Gru<T>::StepCache> g_gru(static_cast<size_t>(Tq));
  std::vector<std::vector<T>> g_h(static_cast<size_t>(Tq));
  std::vector<std::array<T, 2>> wp(static_cast<size_t>(Tq));
  std::vector<T> phi(static_cast<size_t>(Tq));
  {
    std::vector<T> h(static_cast<size_t>(d_.hidden), T(0));
    for (int t = 0; t < Tq; ++t) {
      int zi = std::min(t, Ts - 1);
      std::vector<T> u = concat_input(z_demo.data(), s_z[static_cast<size_t>(zi)].data(),
                                      r_s[static_cast<size_t>(t)].data(),
                                      r_g[static_cast<size_t>(t)].data());
      std::vector<T> h_new(static_cast<size_t>(d_.hidden));
      gen_gru_.step(ps_, u.data(), h.data(), h_new.data(), &g_gru[static_cast<size_t>(t)]);
      h = std::move(h_new);
      g_h[static_cast<size_t>(t)] = h;
      T w2[2], ppre;
      wp_head_.forward(ps_, h.data(), w2);
      phi_head_.forward(ps_, h.data(), &ppre);
      wp[static_cast<size_t>(t)] = {w2[0], w2[1]};
      phi[static_cast<size_t>(t)] = sigmoid(ppre);
    }
  }

  // --- loss ---
  RecordStats stats;
  stats.steps = Tq;
  for (int t = 0; t < Tq; ++t) {
    const expert::QueryFrame& q = rec.exec[static_cast<size_t>(t)];
    double ex = static_cast<double>(wp[static_cast<size_t>(t)][0]) - q.wp_x;
    double ey = static_cast<double>(wp[static_cast<size_t>(t)][1]) - q.wp_y;
    double ep = static_cast<double>(phi[static_cast<size_t>(t)]) - q.phi;
    stats.wp_se += ex * ex + ey * ey;
    stats.phi_se += ep * ep;
  }
  stats.wp_se /= Tq;
  stats.phi_se /= Tq;
  stats.loss = stats.wp_se + lambda * stats.phi_se;
  if (!g) return stats;

  // --- backward ---
  Grads<T>& gr = *g;
  std::vector<std::vector<T>> dA_q(static_cast<size_t>(Tq));
  for (int t = 0; t < Tq; ++t)
    dA_q[static_cast<size_t>(t)].assign(static_cast<size_t>(d_.obs_feat), T(0));
  std::vector<std::vector<T>> dA_demo(static_cast<size_t>(K));
  for (int t = 0; t < K; ++t)
    dA_demo[static_cast<size_t>(t)].assign(static_cast<size_t>(d_.obs_feat), T(0));

  std::vector<T> dz_demo(static_cast<size_t>(d_.z), T(0));
  std::vector<std::vector<T>> dz_stream(static_cast<size_t>(Ts));
  for (int t = 0; t < Ts; ++t)
    dz_stream[static_cast<size_t>(t)].assign(static_cast<size_t>(d_.z), T(0));
  std::vector<T> dp_start(static_cast<size_t>(d_.proj), T(0));
  std::vector<T> dp_goal(static_cast<size_t>(d_.proj), T(0));

  // generator BPTT
  {
    std::vector<T> dh(static_cast<size_t>(d_.hidden), T(0));
    for (int t = Tq - 1; t >= 0; --t) {
      const expert::QueryFrame& q = rec.exec[static_cast<size_t>(t)];
      T dwp[2] = {static_cast<T>(2.0 / Tq * (wp[static_cast<size_t>(t)][0] - q.wp_x)),
                  static_cast<T>(2.0 / Tq * (wp[static_cast<size_t>(t)][1] - q.wp_y))};
      T ph = phi[static_cast<size_t>(t)];
      T dppre = static_cast<T>(lambda * 2.0 / Tq * (ph - q.phi)) * ph * (T(1) - ph);
      wp_head_.backward(ps_, g_h[static_cast<size_t>(t)].data(), dwp, gr, dh.data());
      phi_head_.backward(ps_, g_h[static_cast<size_t>(t)].data(), &dppre, gr, dh.data());

      std::vector<T> du(static_cast<size_t>(2 * d_.z + 2 * d_.rel), T(0));
      std::vector<T> dh_prev(static_cast<size_t>(d_.hidden), T(0));
      gen_gru_.backward_step(ps_, g_gru[static_cast<size_t>(t)], dh.data(), gr,
                             du.data(), dh_prev.data());
      dh = std::move(dh_prev);

      const T* pu = du.data();
      for (int i = 0; i < d_.z; ++i) dz_demo[static_cast<size_t>(i)] += pu[i];
      int zi = std::min(t, Ts - 1);
      for (int i = 0; i < d_.z; ++i)
        dz_stream[static_cast<size_t>(zi)][static_cast<size_t>(i)] += pu[d_.z + i];

      // relation backward: r = tanh(fc([p_cur ; p_ref]))
      std::vector<T> dp_cur_acc(static_cast<size_t>(d_.proj), T(0));
      auto rel_back = [&](const std::vector<T>& r, const T* dr_in,
                          const std::vector<T>& pc, const std::vector<T>& pr,
                          std::vector<T>& dp_ref) {
        std::vector<T> dr(dr_in, dr_in + d_.rel);
        tanh_backward(r.data(), dr.data(), d_.rel);
        std::vector<T> cat(static_cast<size_t>(2 * d_.proj));
        std::copy(pc.begin(), pc.end(), cat.begin());
        std::copy(pr.begin(), pr.end(), cat.begin() + d_.proj);
        std::vector<T> dcat(static_cast<size_t>(2 * d_.proj), T(0));
        rel_fc_.backward(ps_, cat.data(), dr.data(), gr, dcat.data());
        // current side accumulates into the query's projection grad buffer
        for (int i = 0; i < d_.proj; ++i) {
          dp_cur_acc[static_cast<size_t>(i)] += dcat[static_cast<size_t>(i)];
          dp_ref[static_cast<size_t>(i)] += dcat[static_cast<size_t>(d_.proj + i)];
        }
      };
      rel_back(r_s[static_cast<size_t>(t)], pu + 2 * d_.z,
               p_cur[static_cast<size_t>(t)], p_start, dp_start);
      rel_back(r_g[static_cast<size_t>(t)], pu + 2 * d_.z + d_.rel,
               p_cur[static_cast<size_t>(t)], p_goal, dp_goal);
      // projection backward for the current side
      std::vector<T> dpc = dp_cur_acc;
      tanh_backward(p_cur[static_cast<size_t>(t)].data(), dpc.data(), d_.proj);
      rel_proj_.backward(ps_, q_oc[static_cast<size_t>(t)].A.data(), dpc.data(), gr,
                         dA_q[static_cast<size_t>(t)].data());
    }
  }

  // projection backward for the demo endpoints
  {
    tanh_backward(p_start.data(), dp_start.data(), d_.proj);
    rel_proj_.backward(ps_, A_start.data(), dp_start.data(), gr, dA_demo.front().data());
    tanh_backward(p_goal.data(), dp_goal.data(), d_.proj);
    rel_proj_.backward(ps_, A_goal.data(), dp_goal.data(), gr, dA_demo.back().data());
  }

  // encoder BPTT helper
  auto encoder_back = [&](const std::vector<ObsCache>& oc, int len,
                          const std::vector<std::vector<T>>& e_in_cache,
                          const std::vector<typename Gru<T>::StepCache>& gru_cache,
                          const std::vector<std::vector<T>>& h_seq,
                          const std::vector<std::vector<T>>& z_seq,
                          const std::vector<std::vector<T>>* dz_per_step,
                          const std::vector<T>* dz_final,
                          std::vector<std::vector<T>>& dA_out) {
    std::vector<T> dh(static_cast<size_t>(d_.hidden), T(0));
    for (int t = len - 1; t >= 0; --t) {
      std::vector<T> dz(static_cast<size_t>(d_.z), T(0));
      if (dz_per_step)
        dz = (*dz_per_step)[static_cast<size_t>(t)];
      if (dz_final && t == len - 1)
        for (int i = 0; i < d_.z; ++i) dz[static_cast<size_t>(i)] += (*dz_final)[static_cast<size_t>(i)];
      tanh_backward(z_seq[static_cast<size_t>(t)].data(), dz.data(), d_.z);
      z_proj_.backward(ps_, h_seq[static_cast<size_t>(t)].data(), dz.data(), gr, dh.data());

      std::vector<T> de(static_cast<size_t>(d_.enc_in), T(0));
      std::vector<T> dh_prev(static_cast<size_t>(d_.hidden), T(0));
      enc_gru_.backward_step(ps_, gru_cache[static_cast<size_t>(t)], dh.data(), gr,
                             de.data(), dh_prev.data());
      dh = std::move(dh_prev);
      tanh_backward(e_in_cache[static_cast<size_t>(t)].data(), de.data(), d_.enc_in);
      enc_in_.backward(ps_, oc[static_cast<size_t>(t)].A.data(), de.data(), gr,
                       dA_out[static_cast<size_t>(t)].data());
    }
  };

  if (relabeled) {
    // stream pass gets per-step grads; demo pass gets the z_demo grad
    encoder_back(*enc_stream_oc, Ts, s_ein, s_gru, s_h, s_z, &dz_stream, nullptr, dA_q);
    encoder_back(demo_oc, K, d_ein, d_gru, d_h, d_z, nullptr, &dz_demo, dA_demo);
  } else {
    // single pass: the demo embedding is the last prefix embedding
    encoder_back(demo_oc, K, s_ein, s_gru, s_h, s_z, &dz_stream, &dz_demo, dA_demo);
  }

  // observation stack backward, once per frame with the summed grads
  for (int t = 0; t < Tq; ++t)
    obs_backward(q_oc[static_cast<size_t>(t)], dA_q[static_cast<size_t>(t)], gr);
  for (int t = 0; t < K; ++t)
    obs_backward(demo_oc[static_cast<size_t>(t)], dA_demo[static_cast<size_t>(t)], gr);

  return stats;
}

// Adam with per-epoch learning-rate decay applied by the trainer
template <typename T>
class Adam {
 public:
  explicit Adam(const ParamStore<T>& ps, double lr = 3e-4, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    m_ = ps.make_grads();
    v_ = ps.make_grads();
  }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

  void step(ParamStore<T>& ps, const Grads<T>& g) {
    ++t_;
    double bc1 = 1.0 - std::pow(b1_, t_);
    double bc2 = 1.0 - std::pow(b2_, t_);
    for (size_t i = 0; i < g.size(); ++i) {
      T* p = ps.at(static_cast<int>(i)).v.data();
      const T* gi = g[i].data();
      T* mi = m_[i].data();
      T* vi = v_[i].data();
      for (size_t k = 0; k < g[i].size(); ++k) {
        mi[k] = static_cast<T>(b1_ * mi[k] + (1.0 - b1_) * gi[k]);
        vi[k] = static_cast<T>(b2_ * vi[k] + (1.0 - b2_) * gi[k] * gi[k]);
        double mhat = mi[k] / bc1;
        double vhat = vi[k] / bc2;
        p[k] -= static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  int t_ = 0;
  Grads<T> m_, v_;
};

}  // namespace bnav::nn
