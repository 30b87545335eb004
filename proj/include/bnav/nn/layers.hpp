#pragma once

#include <cmath>
#include <vector>

#include "bnav/nn/tensor.hpp"

namespace bnav::nn {

// All backward routines accumulate (+=) into their output gradients; callers
// zero the buffers once per record.

template <typename T>
inline void tanh_forward(T* x, int n) {
  for (int i = 0; i < n; ++i) x[i] = std::tanh(x[i]);
}

// y is the forward output (tanh applied in place)
template <typename T>
inline void tanh_backward(const T* y, T* dy_inplace, int n) {
  for (int i = 0; i < n; ++i) dy_inplace[i] *= (T(1) - y[i] * y[i]);
}

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
struct Linear {
  int w = -1, b = -1;
  int in = 0, out = 0;

  void build(ParamStore<T>& ps, const std::string& name, int in_dim, int out_dim) {
    in = in_dim;
    out = out_dim;
    w = ps.add(name + ".w", {out_dim, in_dim});
    b = ps.add(name + ".b", {out_dim});
  }

  void forward(const ParamStore<T>& ps, const T* x, T* y) const {
    const T* W = ps.at(w).v.data();
    const T* B = ps.at(b).v.data();
    for (int o = 0; o < out; ++o) {
      T acc = B[o];
      const T* row = W + static_cast<size_t>(o) * in;
      for (int i = 0; i < in; ++i) acc += row[i] * x[i];
      y[o] = acc;
    }
  }

  void backward(const ParamStore<T>& ps, const T* x, const T* dy,
                Grads<T>& g, T* dx) const {
    const T* W = ps.at(w).v.data();
    T* dW = g[static_cast<size_t>(w)].data();
    T* dB = g[static_cast<size_t>(b)].data();
    for (int o = 0; o < out; ++o) {
      T d = dy[o];
      dB[o] += d;
      T* drow = dW + static_cast<size_t>(o) * in;
      const T* row = W + static_cast<size_t>(o) * in;
      for (int i = 0; i < in; ++i) {
        drow[i] += d * x[i];
        if (dx) dx[i] += row[i] * d;
      }
    }
  }
};

// 1-D convolution over [channels x length] with zero padding
template <typename T>
struct Conv1d {
  int w = -1, b = -1;
  int in_ch = 0, out_ch = 0, k = 0, stride = 1, pad = 0;
  int len_in = 0, len_out = 0;

  void build(ParamStore<T>& ps, const std::string& name, int ic, int oc,
             int kernel, int s, int p, int input_len) {
    in_ch = ic;
    out_ch = oc;
    k = kernel;
    stride = s;
    pad = p;
    len_in = input_len;
    len_out = (input_len + 2 * p - kernel) / s + 1;
    w = ps.add(name + ".w", {oc, ic, kernel});
    b = ps.add(name + ".b", {oc});
  }

  void forward(const ParamStore<T>& ps, const T* x, T* y) const {
    const T* W = ps.at(w).v.data();
    const T* B = ps.at(b).v.data();
    for (int oc = 0; oc < out_ch; ++oc) {
      for (int j = 0; j < len_out; ++j) {
        T acc = B[oc];
        for (int ic = 0; ic < in_ch; ++ic) {
          const T* Wp = W + (static_cast<size_t>(oc) * in_ch + ic) * k;
          const T* xp = x + static_cast<size_t>(ic) * len_in;
          int base = j * stride - pad;
          for (int t = 0; t < k; ++t) {
            int i = base + t;
            if (i >= 0 && i < len_in) acc += Wp[t] * xp[i];
          }
        }
        y[static_cast<size_t>(oc) * len_out + j] = acc;
      }
    }
  }

  void backward(const ParamStore<T>& ps, const T* x, const T* dy,
                Grads<T>& g, T* dx) const {
    const T* W = ps.at(w).v.data();
    T* dW = g[static_cast<size_t>(w)].data();
    T* dB = g[static_cast<size_t>(b)].data();
    for (int oc = 0; oc < out_ch; ++oc) {
      for (int j = 0; j < len_out; ++j) {
        T d = dy[static_cast<size_t>(oc) * len_out + j];
        dB[oc] += d;
        int base = j * stride - pad;
        for (int ic = 0; ic < in_ch; ++ic) {
          const T* Wp = W + (static_cast<size_t>(oc) * in_ch + ic) * k;
          T* dWp = dW + (static_cast<size_t>(oc) * in_ch + ic) * k;
          const T* xp = x + static_cast<size_t>(ic) * len_in;
          T* dxp = dx ? dx + static_cast<size_t>(ic) * len_in : nullptr;
          for (int t = 0; t < k; ++t) {
            int i = base + t;
            if (i < 0 || i >= len_in) continue;
            dWp[t] += d * xp[i];
            if (dxp) dxp[i] += Wp[t] * d;
          }
        }
      }
    }
  }
};

// GRU cell, gate order [r; z; n], biases split between input and hidden
// halves so the reset gate scales the hidden bias term as well
template <typename T>
struct Gru {
  int w_ih = -1, b_ih = -1, w_hh = -1, b_hh = -1;
  int in = 0, hidden = 0;

  void build(ParamStore<T>& ps, const std::string& name, int in_dim, int h_dim) {
    in = in_dim;
    hidden = h_dim;
    w_ih = ps.add(name + ".w_ih", {3 * h_dim, in_dim});
    b_ih = ps.add(name + ".b_ih", {3 * h_dim});
    w_hh = ps.add(name + ".w_hh", {3 * h_dim, h_dim});
    b_hh = ps.add(name + ".b_hh", {3 * h_dim});
  }

  struct StepCache {
    std::vector<T> x, h_prev, r, z, n, gh_n;
  };

  void step(const ParamStore<T>& ps, const T* x, const T* h_prev, T* h_out,
            StepCache* cache) const {
    const T* Wi = ps.at(w_ih).v.data();
    const T* Bi = ps.at(b_ih).v.data();
    const T* Wh = ps.at(w_hh).v.data();
    const T* Bh = ps.at(b_hh).v.data();
    std::vector<T> gi(3 * hidden), gh(3 * hidden);
    for (int o = 0; o < 3 * hidden; ++o) {
      T acc = Bi[o];
      const T* row = Wi + static_cast<size_t>(o) * in;
      for (int i = 0; i < in; ++i) acc += row[i] * x[i];
      gi[static_cast<size_t>(o)] = acc;
      T acch = Bh[o];
      const T* rowh = Wh + static_cast<size_t>(o) * hidden;
      for (int i = 0; i < hidden; ++i) acch += rowh[i] * h_prev[i];
      gh[static_cast<size_t>(o)] = acch;
    }
    std::vector<T> r(hidden), z(hidden), n(hidden);
    for (int i = 0; i < hidden; ++i) {
      r[static_cast<size_t>(i)] = sigmoid(gi[static_cast<size_t>(i)] + gh[static_cast<size_t>(i)]);
      z[static_cast<size_t>(i)] = sigmoid(gi[static_cast<size_t>(hidden + i)] +
                                          gh[static_cast<size_t>(hidden + i)]);
      n[static_cast<size_t>(i)] = std::tanh(gi[static_cast<size_t>(2 * hidden + i)] +
                                            r[static_cast<size_t>(i)] *
                                                gh[static_cast<size_t>(2 * hidden + i)]);
      h_out[i] = (T(1) - z[static_cast<size_t>(i)]) * n[static_cast<size_t>(i)] +
                 z[static_cast<size_t>(i)] * h_prev[i];
    }
    if (cache) {
      cache->x.assign(x, x + in);
      cache->h_prev.assign(h_prev, h_prev + hidden);
      cache->r = std::move(r);
      cache->z = std::move(z);
      cache->n = std::move(n);
      cache->gh_n.assign(gh.begin() + 2 * hidden, gh.end());
    }
  }

  void backward_step(const ParamStore<T>& ps, const StepCache& c, const T* dh_out,
                     Grads<T>& g, T* dx, T* dh_prev) const {
    const T* Wi = ps.at(w_ih).v.data();
    const T* Wh = ps.at(w_hh).v.data();
    T* dWi = g[static_cast<size_t>(w_ih)].data();
    T* dBi = g[static_cast<size_t>(b_ih)].data();
    T* dWh = g[static_cast<size_t>(w_hh)].data();
    T* dBh = g[static_cast<size_t>(b_hh)].data();

    std::vector<T> dgi(3 * hidden), dgh(3 * hidden);
    for (int i = 0; i < hidden; ++i) {
      T r = c.r[static_cast<size_t>(i)], z = c.z[static_cast<size_t>(i)];
      T n = c.n[static_cast<size_t>(i)], ghn = c.gh_n[static_cast<size_t>(i)];
      T dho = dh_out[i];
      T dz = dho * (c.h_prev[static_cast<size_t>(i)] - n);
      T dn = dho * (T(1) - z);
      if (dh_prev) dh_prev[i] += dho * z;
      T dpre_n = dn * (T(1) - n * n);
      T dr = dpre_n * ghn;
      T dpre_r = dr * r * (T(1) - r);
      T dpre_z = dz * z * (T(1) - z);
      dgi[static_cast<size_t>(i)] = dpre_r;
      dgi[static_cast<size_t>(hidden + i)] = dpre_z;
      dgi[static_cast<size_t>(2 * hidden + i)] = dpre_n;
      dgh[static_cast<size_t>(i)] = dpre_r;
      dgh[static_cast<size_t>(hidden + i)] = dpre_z;
      dgh[static_cast<size_t>(2 * hidden + i)] = dpre_n * r;
    }
    for (int o = 0; o < 3 * hidden; ++o) {
      T di = dgi[static_cast<size_t>(o)];
      dBi[o] += di;
      const T* rowi = Wi + static_cast<size_t>(o) * in;
      T* drowi = dWi + static_cast<size_t>(o) * in;
      for (int i = 0; i < in; ++i) {
        drowi[i] += di * c.x[static_cast<size_t>(i)];
        if (dx) dx[i] += rowi[i] * di;
      }
      T dh = dgh[static_cast<size_t>(o)];
      dBh[o] += dh;
      const T* rowh = Wh + static_cast<size_t>(o) * hidden;
      T* drowh = dWh + static_cast<size_t>(o) * hidden;
      for (int i = 0; i < hidden; ++i) {
        drowh[i] += dh * c.h_prev[static_cast<size_t>(i)];
        if (dh_prev) dh_prev[i] += rowh[i] * dh;
      }
    }
  }
};

}  // namespace bnav::nn
