#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "neurolip/tensor.hpp"

namespace neurolip {

/// Named-tensor container file:
///   8 bytes  magic "NLTENS01"
///   u64 LE   length of the JSON index
///   JSON     {"meta": {...}, "tensors": [{"name", "shape", "offset", "nbytes"}, ...]}
///   payload  float32 little-endian, tensors back to back in index order
struct TensorFile {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_tensor_file(const TensorFile& file);
TensorFile decode_tensor_file(const std::vector<std::uint8_t>& bytes);

void save_tensor_file(const TensorFile& file, const std::filesystem::path& path);
TensorFile load_tensor_file(const std::filesystem::path& path);

/// Snapshot of a model's parameters and buffers, in collection order.
TensorFile snapshot_state(const StateRefs<float>& refs);

/// Copies matching tensors into the model. Missing or mis-shaped tensors throw.
void restore_state(const TensorFile& file, const StateRefs<float>& refs);

}  // namespace neurolip
