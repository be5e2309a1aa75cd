#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "soda/model/config.hpp"
#include "soda/model/network.hpp"

namespace soda::model {

inline constexpr uint32_t kCheckpointSchemaVersion = 1;

/// Checkpoint layout (little-endian):
///   "SODACKPT" magic, u32 schema_version,
///   u64 metadata length, metadata JSON ({"config": ..., "extra": ...}),
///   u32 tensor count, then per tensor:
///     u32 name length, name bytes, u8 dtype code, u8 rank, i64 dims[rank],
///     u64 byte length, raw contiguous bytes.
struct Checkpoint {
  uint32_t schema_version = kCheckpointSchemaVersion;
  ModelConfig config;
  nlohmann::json extra = nlohmann::json::object();
  std::map<std::string, torch::Tensor> tensors;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Parameters and buffers of `net` under their registered names.
std::map<std::string, torch::Tensor> state_dict(const torch::nn::Module& net);

void save_model(const std::filesystem::path& path, const SodaNet& net,
                const nlohmann::json& extra = nlohmann::json::object());

/// Builds a network from the checkpoint's own config.
SodaNet load_model(const std::filesystem::path& path);

/// Loads into an existing network. Throws CheckpointError listing differing
/// config fields when the checkpoint was written for another configuration.
void load_into(const Checkpoint& ckpt, SodaNet& net);

}  // namespace soda::model
