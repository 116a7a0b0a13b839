#pragma once

// Extractor and compressor agents: hierarchical / flat attentional Bi-LSTM
// encoders feeding glimpse-then-point pointer decoders.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "urlcomsum/autodiff.hpp"
#include "urlcomsum/corpus.hpp"
#include "urlcomsum/layers.hpp"
#include "urlcomsum/rng.hpp"

namespace urlcomsum {

struct ModelConfig {
  int d_emb = 300;
  int hidden = 150;  // per direction
  int layers = 3;
  int heads = 4;
  int max_sentences = 40;
  int max_words = 50;

  int rep_dim() const { return 2 * hidden; }
  void validate() const;
};

struct Budgets {
  int sentences = 3;  // L_E
  int words = 58;     // L_C
};

enum class DecodeMode { greedy, sampled };

const char* to_string(DecodeMode mode);
DecodeMode parse_decode_mode(const std::string& s);

struct PointerSequence {
  std::vector<int> indices;
  std::vector<double> step_log_probs;
  DecodeMode mode = DecodeMode::greedy;
  bool truncated = false;
  // Full distribution at each step, kept only when requested.
  std::vector<Eigen::VectorXd> step_distributions;

  double total_log_prob() const;
};

enum class SummaryLevel { sentence, word };

struct TokenPosition {
  int sentence = 0;
  int word = 0;
  friend auto operator<=>(const TokenPosition&, const TokenPosition&) = default;
};

struct SummaryCandidate {
  SummaryLevel level = SummaryLevel::sentence;
  PointerSequence pointers;
  Tokens tokens;
  std::string text;
  std::vector<TokenPosition> positions;  // document position of every token
};

class ExtractorEncoder {
 public:
  ExtractorEncoder() = default;
  ExtractorEncoder(ParamStore& store, const ModelConfig& cfg, Rng& rng);

  /// sentence_count x 2h representations of the real sentences.
  ad::Var forward(const Binder& bind, const IndexedDocument& idoc, const EmbeddingTable& emb,
                  ad::RowGradSink* emb_sink = nullptr) const;

 private:
  BiLstm word_lstm_, word_post_, sent_lstm_, sent_post_;
  MultiHeadAttention word_attn_, sent_attn_;
};

class CompressorEncoder {
 public:
  CompressorEncoder() = default;
  CompressorEncoder(ParamStore& store, const ModelConfig& cfg, Rng& rng);

  /// One row per real position (mask true), in order.
  ad::Var forward(const Binder& bind, std::span<const int> ids, const std::vector<bool>& mask,
                  const EmbeddingTable& emb, ad::RowGradSink* emb_sink = nullptr,
                  Eigen::MatrixXd* attention = nullptr) const;

 private:
  BiLstm lstm_, post_;
  MultiHeadAttention attn_;
};

class PointerNetwork {
 public:
  PointerNetwork() = default;
  PointerNetwork(ParamStore& store, std::string prefix, int rep_dim, Rng& rng);

  struct Result {
    PointerSequence sequence;
    ad::Var log_prob_sum;  // 1x1
  };

  /// Selects up to `budget` distinct unmasked rows of reps. When `forced` is
  /// non-empty those indices are scored instead of decoding (teacher forcing).
  Result decode(const Binder& bind, ad::Var reps, const std::vector<bool>& mask, int budget,
                DecodeMode mode, Rng* rng, std::span<const int> forced = {},
                bool keep_distributions = false) const;

 private:
  std::string prefix_;
  int rep_dim_ = 0;
};

/// Both agents and their parameters.
class Summarizer {
 public:
  Summarizer() = default;
  Summarizer(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  const ExtractorEncoder& extractor_encoder() const { return ext_enc_; }
  const PointerNetwork& extractor_pointer() const { return ext_ptr_; }
  const CompressorEncoder& compressor_encoder() const { return comp_enc_; }
  const PointerNetwork& compressor_pointer() const { return comp_ptr_; }

  static bool is_extractor_param(const std::string& name) { return name.starts_with("extractor/"); }

 private:
  ModelConfig cfg_;
  ParamStore params_;
  ExtractorEncoder ext_enc_;
  PointerNetwork ext_ptr_;
  CompressorEncoder comp_enc_;
  PointerNetwork comp_ptr_;
};

/// The compressor's input: tokens of the extracted sentences in document
/// order, each sentence cut at max_words.
struct CompressorInput {
  Tokens tokens;
  std::vector<TokenPosition> positions;
};
CompressorInput compressor_input(const SummaryCandidate& extractive, int max_words);

struct ForcedChoices {
  std::vector<int> extractor;
  std::vector<int> compressor;
};

struct AgentTrace {
  SummaryCandidate extractive;
  SummaryCandidate compressive;
  ad::Var extractor_log_prob;   // summed over steps
  ad::Var compressor_log_prob;  // summed over steps
};

/// Full extract-then-compress pass on one tape.
AgentTrace run_agents(const Binder& bind, const Summarizer& model, const Document& doc,
                      const IndexedDocument& idoc, const Vocab& vocab, const EmbeddingTable& emb,
                      const Budgets& budgets, DecodeMode mode, Rng* rng,
                      const ForcedChoices* forced = nullptr, ad::RowGradSink* emb_sink = nullptr,
                      bool keep_distributions = false);

// Inference entry points. None of them write to the model.

/// max_sentences x 2h, zero rows at pad slots.
Eigen::MatrixXd encode_sentences(const IndexedDocument& idoc, const EmbeddingTable& emb,
                                 const Summarizer& model);

/// Rows for every slot of ids (pad rows zero); `attention` receives the
/// head-averaged word attention over all slots.
Eigen::MatrixXd encode_words(std::span<const int> ids, const std::vector<bool>& mask,
                             const EmbeddingTable& emb, const Summarizer& model,
                             Eigen::MatrixXd* attention = nullptr);

PointerSequence decode_pointers(const Eigen::MatrixXd& reps, const std::vector<bool>& mask,
                                int budget, DecodeMode mode, const PointerNetwork& pointer,
                                const ParamStore& params, std::uint64_t seed,
                                bool keep_distributions = false);

SummaryCandidate extract(const Document& doc, const IndexedDocument& idoc,
                         const EmbeddingTable& emb, const Summarizer& model, int max_sentences_out,
                         DecodeMode mode, std::uint64_t seed);

SummaryCandidate compress(const SummaryCandidate& extractive, const Vocab& vocab,
                          const EmbeddingTable& emb, const Summarizer& model, int max_words_out,
                          DecodeMode mode, std::uint64_t seed);

struct SummaryPair {
  SummaryCandidate extractive;
  SummaryCandidate compressive;
};

SummaryPair summarize(const Document& doc, const Vocab& vocab, const EmbeddingTable& emb,
                      const Summarizer& model, const Budgets& budgets, DecodeMode mode,
                      std::uint64_t seed);

std::string detokenize(std::span<const std::string> tokens);

}  // namespace urlcomsum
