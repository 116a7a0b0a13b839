#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "urlcomsum/corpus.hpp"
#include "urlcomsum/model.hpp"
#include "urlcomsum/optim.hpp"

namespace urlcomsum {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Bad magic, unsupported version, or a shape that does not match the model.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RewardStats {
  long count = 0;
  double mean_sampled = 0.0;
  double mean_baseline = 0.0;

  void add(double sampled, double baseline);
};

struct Checkpoint {
  ModelConfig model_config;
  std::uint64_t model_seed = 0;
  nlohmann::json train_config;  // snapshot, informational
  Vocab vocab;
  EmbeddingTable embeddings;
  ParamStore params;
  std::optional<AdamW> optimizer;
  long step = 0;
  std::string rng_state;
  RewardStats stats;
};

/// Layout: 8-byte magic, u32 version, u64 header length, JSON header, then
/// little-endian doubles for each tensor listed in the header, in order.
/// Written to a temporary file and renamed so a failed write never clobbers
/// the previous checkpoint.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Builds the model from the stored config and overwrites its parameters.
Summarizer restore_model(const Checkpoint& ckpt);

}  // namespace urlcomsum

namespace urlcomsum {

/// What inference needs from a checkpoint.
struct ModelBundle {
  Summarizer model;
  Vocab vocab;
  EmbeddingTable embeddings;
};

ModelBundle load_model_bundle(const std::filesystem::path& path);

}  // namespace urlcomsum
