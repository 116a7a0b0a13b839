#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "urlcomsum/checkpoint.hpp"
#include "urlcomsum/config.hpp"
#include "urlcomsum/corpus.hpp"
#include "urlcomsum/lm.hpp"
#include "urlcomsum/model.hpp"
#include "urlcomsum/optim.hpp"
#include "urlcomsum/rewards.hpp"
#include "urlcomsum/stopwords.hpp"

namespace urlcomsum {

/// A training document. Only the text is reachable from here.
struct TrainExample {
  const Document* doc = nullptr;
  IndexedDocument idoc;
  Tokens doc_tokens;
};

/// Everything a step needs that the optimizer never changes.
struct TrainingData {
  std::vector<Document> documents;  // summaries stripped
  Vocab vocab;
  EmbeddingTable embeddings;
  StopwordSet stopwords;
  LanguageModelHandle lm;
  std::vector<TrainExample> examples;

  RewardContext reward_context(const TrainConfig& cfg) const;
};

/// Reads documents (never reference summaries), builds vocab, embeddings, the
/// fluency language model, and index tensors. Empty documents are dropped.
TrainingData load_training_data(const TrainConfig& cfg);

/// Same as load_training_data but from documents already in memory; any
/// reference summaries they carry are discarded.
TrainingData prepare_training_data(std::vector<Document> docs, const TrainConfig& cfg,
                                   const Vocab* fixed_vocab = nullptr,
                                   const EmbeddingTable* fixed_embeddings = nullptr);

struct TrainState {
  Summarizer model;
  AdamW optimizer;
  long step = 0;
  Rng rng;
  RewardStats stats;
};

TrainState initial_state(const TrainConfig& cfg);

using RewardFn = std::function<RewardBreakdown(const TrainExample&, const SummaryCandidate&)>;

struct StepOptions {
  bool update_extractor = true;
  bool update_compressor = true;
  bool apply_update = true;  // false: leave gradients in params, touch nothing else
  double grad_clip_norm = 2.0;
};

struct StepMetrics {
  long step = 0;
  double loss = 0.0;
  double r_sampled = 0.0;   // batch means
  double r_baseline = 0.0;
  double coverage = 0.0;    // of the sampled summaries
  double fluency = 0.0;
  double grad_norm = 0.0;   // before clipping
  bool skipped = false;
  std::string skip_reason;
  std::vector<ForcedChoices> sampled_choices;
  std::vector<double> sampled_log_probs;  // extractor + compressor, per document
  std::vector<double> advantages;
};

/// One self-critical update. Per document, a sampled and a greedy rollout of
/// both agents are scored by reward_fn on their compressive outputs; the loss
/// is -(R_s - R_g) times the step-averaged log-probability of each agent's
/// sampled pointer sequence, averaged over the batch. A batch whose
/// advantages are all zero changes nothing, not even weight decay.
StepMetrics scst_step(std::span<const TrainExample* const> batch, TrainState& state,
                      const TrainingData& data, const Budgets& budgets, const RewardFn& reward_fn,
                      const StepOptions& options = {});

/// Sum of extractor and compressor log-probabilities of the given choices.
double sequence_log_prob(const TrainExample& ex, const Summarizer& model, const TrainingData& data,
                         const Budgets& budgets, const ForcedChoices& choices);

/// Mean total reward of greedy compressive summaries over the examples.
double mean_greedy_reward(const Summarizer& model, const TrainingData& data, const TrainConfig& cfg);

/// Batch order of one epoch; depends only on the seed and epoch.
std::vector<std::size_t> epoch_order(std::uint64_t seed, long epoch, std::size_t n);

struct TrainResult {
  std::filesystem::path checkpoint;
  std::filesystem::path metrics;
  long steps = 0;
  std::vector<StepMetrics> history;  // steps run in this call
};

/// Runs scst_step over shuffled batches, appending one JSON line per step to
/// out/metrics.jsonl and writing out/checkpoint.bin at the configured
/// cadence and at the end. With resume_from, state continues from that
/// checkpoint and the same data must be supplied.
TrainResult train(const TrainConfig& cfg, const std::optional<std::filesystem::path>& resume_from = {});

Checkpoint make_checkpoint(const TrainState& state, const TrainingData& data, const TrainConfig& cfg,
                           std::uint64_t model_seed);

}  // namespace urlcomsum
