#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "deltamap/nets.hpp"

namespace deltamap {

// Generator parameters and buffers captured at a point in training. Arrays
// are held as float64 in memory; `dtype` records the training precision and
// is what gets written to disk, so a save/load cycle is byte-stable.
struct GeneratorSnapshot {
  nets::GeneratorConfig config;
  std::string dtype;  // "f32" | "f64"
  std::vector<std::pair<std::string, ad::Tensor<double>>> arrays;

  const ad::Tensor<double>* find(const std::string& name) const {
    for (const auto& [n, t] : arrays)
      if (n == name) return &t;
    return nullptr;
  }
};

// In-plane pixel region excluded from a checkpoint's ensemble contribution
// (the noise-square footprint active while that member trained).
struct ExclusionMask {
  bool empty = true;
  int x0 = 0, y0 = 0, size = 0;

  bool covers(int x, int y) const {
    return !empty && x >= x0 && x < x0 + size && y >= y0 && y < y0 + size;
  }
};

struct CheckpointEnsemble {
  struct Member {
    GeneratorSnapshot snapshot;
    ExclusionMask mask;
    int epoch = 0;  // completed epochs at capture time
  };
  std::vector<Member> members;
};

template <class S>
GeneratorSnapshot snapshot_of(const nets::Generator<S>& gen) {
  GeneratorSnapshot snap;
  snap.config = gen.config();
  snap.dtype = sizeof(S) == 4 ? "f32" : "f64";
  for (const auto& p : gen.parameters())
    snap.arrays.push_back({p->name, p->val.template cast<double>()});
  auto& g = const_cast<nets::Generator<S>&>(gen);
  for (auto& [name, buf] : g.buffers())
    snap.arrays.push_back({name, buf->template cast<double>()});
  return snap;
}

template <class S>
void load_snapshot(const GeneratorSnapshot& snap, nets::Generator<S>& gen) {
  auto assign = [&snap](const std::string& name, ad::Tensor<S>& dst) {
    const ad::Tensor<double>* src = snap.find(name);
    if (!src) throw std::runtime_error("checkpoint: missing array " + name);
    if (src->sh != dst.sh) throw std::runtime_error("checkpoint: shape mismatch for " + name);
    for (size_t i = 0; i < dst.size(); ++i) dst.v[i] = static_cast<S>(src->v[i]);
  };
  for (const auto& p : gen.parameters()) assign(p->name, p->val);
  for (auto& [name, buf] : gen.buffers()) assign(name, *buf);
}

template <class S>
nets::Generator<S> generator_from_snapshot(const GeneratorSnapshot& snap) {
  nets::Generator<S> gen(snap.config);
  load_snapshot(snap, gen);
  return gen;
}

// Binary checkpoint file: "DMCK" magic, version, JSON directory, raw
// little-endian payload in the directory's order.
void save_snapshot_file(const GeneratorSnapshot& snap, const std::string& path);
GeneratorSnapshot load_snapshot_file(const std::string& path);

// Ensemble on disk: one checkpoint file per member plus ensemble.json.
void save_ensemble(const CheckpointEnsemble& ens, const std::string& dir);
CheckpointEnsemble load_ensemble(const std::string& dir);

}  // namespace deltamap
