#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "bnav/common.hpp"
#include "bnav/rng.hpp"

namespace bnav {
class BinWriter;
class BinReader;
}  // namespace bnav

namespace bnav::nn {

template <typename T>
struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<T> v;

  size_t size() const { return v.size(); }
};

// Per-worker gradient buffers, aligned index-for-index with the model's
// tensor list. Summing them record-by-record in a fixed order keeps training
// bit-identical across thread counts.
template <typename T>
using Grads = std::vector<std::vector<T>>;

template <typename T>
class ParamStore {
 public:
  int add(const std::string& name, std::vector<int> shape) {
    Tensor<T> t;
    t.name = name;
    t.shape = std::move(shape);
    size_t n = 1;
    for (int d : t.shape) n *= static_cast<size_t>(d);
    t.v.assign(n, T(0));
    tensors_.push_back(std::move(t));
    return static_cast<int>(tensors_.size()) - 1;
  }

  Tensor<T>& at(int i) { return tensors_[static_cast<size_t>(i)]; }
  const Tensor<T>& at(int i) const { return tensors_[static_cast<size_t>(i)]; }
  std::vector<Tensor<T>>& tensors() { return tensors_; }
  const std::vector<Tensor<T>>& tensors() const { return tensors_; }

  size_t total_params() const {
    size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  Grads<T> make_grads() const {
    Grads<T> g(tensors_.size());
    for (size_t i = 0; i < tensors_.size(); ++i) g[i].assign(tensors_[i].size(), T(0));
    return g;
  }

  // fan-in scaled uniform init, one forked stream per tensor so the values
  // do not depend on initialization order elsewhere
  void init_uniform(uint64_t seed) {
    Rng root(seed);
    for (size_t i = 0; i < tensors_.size(); ++i) {
      Tensor<T>& t = tensors_[i];
      int fan_in = t.shape.size() >= 2 ? t.shape.back() : static_cast<int>(t.size());
      if (t.shape.size() == 3) fan_in = t.shape[1] * t.shape[2];  // conv kernels
      double a = 1.0 / std::sqrt(std::max(1, fan_in));
      Rng rng = root.fork(i + 1);
      for (T& x : t.v) x = static_cast<T>(rng.uniform(-a, a));
    }
  }

 private:
  std::vector<Tensor<T>> tensors_;
};

// float32 checkpoint with named tensors; load verifies names and shapes
void save_checkpoint(const std::string& path, const ParamStore<float>& store);
void load_checkpoint(const std::string& path, ParamStore<float>* store);

// tensor block shared by every model file format
void write_tensors(BinWriter& out, const ParamStore<float>& store);
void read_tensors(BinReader& in, ParamStore<float>* store);

}  // namespace bnav::nn
