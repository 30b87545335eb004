#include "bnav/binio.hpp"
#include "bnav/nn/tensor.hpp"

namespace bnav::nn {

void write_tensors(BinWriter& out, const ParamStore<float>& store) {
  out.put<uint32_t>(static_cast<uint32_t>(store.tensors().size()));
  for (const Tensor<float>& t : store.tensors()) {
    out.put_string(t.name);
    out.put<uint32_t>(static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) out.put<int32_t>(d);
    out.put<uint64_t>(t.size());
    out.put_array(t.v.data(), t.size());
  }
}

void read_tensors(BinReader& in, ParamStore<float>* store) {
  uint32_t n = in.get<uint32_t>();
  if (n != store->tensors().size()) throw IoError("tensor count mismatch");
  for (Tensor<float>& t : store->tensors()) {
    if (in.get_string() != t.name)
      throw IoError("tensor name mismatch at " + t.name);
    uint32_t nd = in.get<uint32_t>();
    if (nd != t.shape.size()) throw IoError("tensor rank mismatch at " + t.name);
    for (int d : t.shape)
      if (in.get<int32_t>() != d) throw IoError("tensor shape mismatch at " + t.name);
    if (in.get<uint64_t>() != t.size())
      throw IoError("tensor size mismatch at " + t.name);
    in.get_array(t.v.data(), t.size());
  }
}

void save_checkpoint(const std::string& path, const ParamStore<float>& store) {
  BinWriter out(path);
  out.put_string("BNAVCKPT1");
  write_tensors(out, store);
  out.check();
}

void load_checkpoint(const std::string& path, ParamStore<float>* store) {
  BinReader in(path);
  if (in.get_string() != "BNAVCKPT1") throw IoError("bad checkpoint magic: " + path);
  read_tensors(in, store);
}

}  // namespace bnav::nn
