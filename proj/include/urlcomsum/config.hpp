#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "urlcomsum/model.hpp"
#include "urlcomsum/rewards.hpp"

namespace urlcomsum {

/// Per-dataset extraction budgets (sentences L_E, words L_C).
std::optional<Budgets> profile_budgets(const std::string& profile);

using KeyValues = std::map<std::string, std::string>;

/// "key = value" per line; '#' starts a comment. Throws on malformed lines.
KeyValues read_key_values(const std::string& path);

enum class Schedule { joint, staged };

struct TrainConfig {
  double learning_rate = 0.01;
  int batch_size = 3;
  int epochs = 1;
  double weight_decay = 0.01;
  double grad_clip_norm = 2.0;
  Budgets budgets{3, 58};
  RewardWeights weights{1.0, 2.0};
  std::uint64_t seed = 1;
  std::uint64_t embedding_seed = kDefaultEmbeddingSeed;
  std::string data_path;
  std::string embeddings_path;
  std::string stopwords_path;
  std::string out_dir;
  int checkpoint_every = 0;  // steps; 0 writes only at the end
  long max_steps = -1;       // stop early after this many total steps
  int min_count = 1;
  int lm_order = 3;
  Schedule schedule = Schedule::joint;
  ModelConfig model;
  OtConfig ot;

  /// Applies recognized keys; throws std::invalid_argument naming an unknown
  /// key or a bad value.
  void apply(const KeyValues& kv);
  void validate() const;
  nlohmann::json to_json() const;
};

}  // namespace urlcomsum
