#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "psgan/config.hpp"
#include "psgan/errors.hpp"
#include "psgan/tensor.hpp"

namespace psgan {

// On-disk training state: a text header (config, step counter, rng state,
// optimizer step counts) followed by named float32 tensors in row-major
// little-endian byte order. Round-trips bitwise.
struct Checkpoint {
  RunConfig config;
  int64_t step = 0;
  std::string rng_state;
  int64_t opt_t_d = 0, opt_t_g = 0;
  std::map<std::string, Tensor<float>> tensors;
};

inline constexpr const char* kCheckpointMagic = "psgan-checkpoint v1";

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << kCheckpointMagic << "\n";
  KvDoc doc;
  ckpt.config.to_doc(doc);
  doc.set_int("step", ckpt.step);
  doc.set("rng.state", ckpt.rng_state);
  doc.set_int("opt.t_d", ckpt.opt_t_d);
  doc.set_int("opt.t_g", ckpt.opt_t_g);
  doc.write(out);
  out << "tensors " << ckpt.tensors.size() << "\n";
  for (const auto& [name, t] : ckpt.tensors) {
    out << "tensor " << name << " f32 " << t.ndim();
    for (int i = 0; i < t.ndim(); ++i) out << " " << t.dim(i);
    out << "\n";
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(t.numel())));
    out << "\n";
  }
  out << "end\n";
  if (!out) throw IoError("short write on checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic)
    throw IoError("not a checkpoint file: " + path);
  std::ostringstream header;
  bool saw_tensors = false;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (line.rfind("tensors ", 0) == 0) {
      count = static_cast<std::size_t>(std::stoull(line.substr(8)));
      saw_tensors = true;
      break;
    }
    header << line << "\n";
  }
  if (!saw_tensors) throw IoError("checkpoint missing tensor table: " + path);
  Checkpoint ckpt;
  std::istringstream hs(header.str());
  KvDoc doc;
  doc.parse(hs);
  ckpt.config = RunConfig::from_doc(doc);
  ckpt.step = doc.get_int("step");
  ckpt.rng_state = doc.get("rng.state");
  ckpt.opt_t_d = doc.get_int("opt.t_d");
  ckpt.opt_t_g = doc.get_int("opt.t_g");
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw IoError("truncated checkpoint: " + path);
    std::istringstream ls(line);
    std::string tag, name, dtype;
    int ndim = 0;
    ls >> tag >> name >> dtype >> ndim;
    if (tag != "tensor" || !ls || ndim < 0)
      throw IoError("bad tensor record in checkpoint: " + path);
    if (dtype != "f32")
      throw IoError("unsupported tensor dtype '" + dtype + "' in " + path);
    std::vector<int64_t> dims(static_cast<std::size_t>(ndim));
    for (auto& d : dims) {
      ls >> d;
      if (!ls || d < 0) throw IoError("bad tensor dims in checkpoint: " + path);
    }
    Tensor<float> t(dims);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(t.numel())));
    if (!in) throw IoError("truncated tensor data in checkpoint: " + path);
    int ch = in.get();
    if (ch != '\n') throw IoError("malformed tensor terminator in checkpoint: " + path);
    ckpt.tensors.emplace(name, std::move(t));
  }
  if (!std::getline(in, line) || line != "end")
    throw IoError("checkpoint missing end marker: " + path);
  return ckpt;
}

inline void copy_named_tensor(const Checkpoint& ck, const std::string& name, Tensor<float>& dst,
                              bool required = true) {
  auto it = ck.tensors.find(name);
  if (it == ck.tensors.end()) {
    if (required) throw IoError("checkpoint missing tensor: " + name);
    return;
  }
  if (!it->second.same_shape(dst))
    throw IoError("checkpoint tensor shape mismatch for " + name + ": got " +
                  it->second.shape_str() + ", expected " + dst.shape_str());
  std::memcpy(dst.data(), it->second.data(),
              sizeof(float) * static_cast<std::size_t>(dst.numel()));
}

}  // namespace psgan
