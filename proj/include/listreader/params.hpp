#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "listreader/tensor.hpp"

namespace listreader {

// Registry of named trainable leaves. Registration order is the canonical
// iteration order everywhere (optimizer, checkpoints), so runs are
// reproducible independent of hash-map layout.
class ParamStore {
 public:
  Tensor add(const std::string& name, Tensor t);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }
  std::size_t count() const { return names_.size(); }
  std::size_t total_parameters() const;
  // Allocates and zeroes every gradient; call before each backward pass.
  void zero_grad();

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Tensor> params_;
};

struct AdamState {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::unordered_map<std::string, std::vector<double>> m;
  std::unordered_map<std::string, std::vector<double>> v;
};

// One bias-corrected Adam update over every parameter in the store, then
// clears gradients. A parameter with no allocated gradient is a contract
// error (zero_grad + backward must run first).
void adam_step(AdamState& state, ParamStore& store);

// Checkpoint archive: format version, a metadata JSON string, every parameter
// (name, shape, little-endian doubles) in registration order, and optionally
// the Adam state.
struct CheckpointData {
  std::uint32_t version = 1;
  std::string meta_json;
  std::vector<std::pair<std::string, Tensor>> params;
  bool has_adam = false;
  AdamState adam;
};

void save_checkpoint(const std::string& path, const ParamStore& store, const AdamState* adam,
                     const std::string& meta_json);
CheckpointData read_checkpoint(const std::string& path);
// Copies checkpoint values into an existing store. Unknown names on either
// side or shape mismatches fail loudly.
void load_checkpoint_into(const CheckpointData& ckpt, ParamStore& store, AdamState* adam_out);

}  // namespace listreader
