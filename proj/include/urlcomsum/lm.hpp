#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "urlcomsum/corpus.hpp"

namespace urlcomsum {

/// log(1e-10), rounded: the floor for unseen events.
inline constexpr double kLogProbFloor = -23.0;

/// Scores a token sequence with a natural-log probability.
class SequenceScorer {
 public:
  virtual ~SequenceScorer() = default;
  virtual double log_prob(std::span<const std::string> tokens) const = 0;
};

/// Add-one smoothed unigram probabilities over the training vocabulary plus
/// one unknown-word slot.
class UnigramTable final : public SequenceScorer {
 public:
  UnigramTable() = default;
  explicit UnigramTable(std::span<const Tokens> sentences);

  double log_prob(const std::string& token) const;
  double log_prob(std::span<const std::string> tokens) const override;
  /// Types seen in training plus the unknown slot.
  std::size_t vocab_size() const { return counts_.size() + 1; }
  const std::unordered_map<std::string, long>& counts() const { return counts_; }

 private:
  std::unordered_map<std::string, long> counts_;
  long total_ = 0;
};

/// Interpolated Kneser-Ney n-gram model (default order 3). Sentences are
/// padded on the left with order-1 "<s>" markers; no end marker is scored.
class KneserNeyLM final : public SequenceScorer {
 public:
  explicit KneserNeyLM(std::span<const Tokens> sentences, int order = 3);

  double log_prob(std::span<const std::string> tokens) const override;
  /// P(word | context) with context holding the previous order-1 tokens.
  double prob(std::span<const std::string> context, const std::string& word) const;
  int order() const { return order_; }
  double discount(int n) const { return discounts_.at(static_cast<std::size_t>(n - 1)); }
  /// Types seen in training plus the unknown slot.
  std::size_t vocab_size() const { return vocab_size_; }

 private:
  struct ContextStats {
    double total = 0.0;   // sum of (continuation) counts following the context
    double types = 0.0;   // distinct followers
  };
  using Key = std::string;  // tokens joined with '\x1f'

  double prob_order(int n, std::span<const std::string> context, const std::string& word) const;

  int order_;
  std::size_t vocab_size_ = 0;
  std::vector<double> discounts_;
  // Per order n (index n-1): counts of n-grams and stats of their (n-1)-token context.
  std::vector<std::unordered_map<Key, double>> counts_;
  std::vector<std::unordered_map<Key, ContextStats>> contexts_;
};

/// What the fluency reward needs: a sequence scorer and unigram table.
struct LanguageModelHandle {
  std::shared_ptr<const SequenceScorer> scorer;
  std::shared_ptr<const UnigramTable> unigram;

  /// Kneser-Ney trigram plus add-one unigram, both from the same corpus.
  static LanguageModelHandle train(std::span<const Document> corpus, int order = 3);
  /// Uses the unigram table as the language model, so SLOR is identically 0.
  static LanguageModelHandle unigram_only(std::span<const Document> corpus);
};

std::vector<Tokens> corpus_sentences(std::span<const Document> corpus);

}  // namespace urlcomsum
