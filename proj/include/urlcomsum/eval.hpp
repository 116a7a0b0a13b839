#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "urlcomsum/checkpoint.hpp"
#include "urlcomsum/corpus.hpp"
#include "urlcomsum/model.hpp"

namespace urlcomsum {

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

/// F-scores scaled to [0, 100].
struct RougeScores {
  double rouge1_f = 0.0;
  double rouge2_f = 0.0;
  double rougeL_f = 0.0;
};

/// Clipped n-gram overlap, as fractions in [0, 1].
PrecisionRecall rouge_n(std::span<const std::string> hyp, std::span<const std::string> ref, int n);
/// Longest common subsequence over the whole summary, as fractions.
PrecisionRecall rouge_l(std::span<const std::string> hyp, std::span<const std::string> ref);

/// Tokens are compared lowercased, punctuation kept, no stemming. Throws on
/// an empty reference; an empty hypothesis scores zero.
RougeScores rouge(std::span<const std::string> hyp, std::span<const std::string> ref);

/// The first L_E sentences.
SummaryCandidate lead_baseline(const Document& doc, int max_sentences_out);
/// The first L_C tokens.
SummaryCandidate lead_word_baseline(const Document& doc, int max_words_out);

/// True if the compressive summary's positions are strictly increasing, all
/// belong to sentences of the extractive summary, carry the token found
/// there, and number at most L_C.
bool is_compressive_subset(const SummaryCandidate& extractive, const SummaryCandidate& compressive,
                           const Document& doc, int max_words_out);

struct SummarySystem {
  std::string name;
  std::function<std::vector<SummaryCandidate>(const Document&)> run;
  std::vector<std::string> rows;  // one label per candidate run() returns
  bool compressive_last = false;  // the last candidate compresses the one before it
};

SummarySystem lead_system(const Budgets& budgets);
SummarySystem lead_word_system(const Budgets& budgets);
/// Rows "<label> Ext." and "<label> Ext.+Com.".
SummarySystem model_system(std::shared_ptr<const ModelBundle> bundle, const Budgets& budgets,
                           DecodeMode mode, std::uint64_t seed, std::string label = "URLComSum");

struct EvalRow {
  std::string system;
  RougeScores scores;
};

struct EvalReport {
  std::string dataset;
  std::size_t sample_size = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<EvalRow> rows;
  std::size_t compressive_checked = 0;
  std::size_t compressive_violations = 0;
};

/// Up to sample_size document indices drawn uniformly without replacement,
/// in ascending order. A sample at least as large as n returns everything.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t sample_size, std::uint64_t seed);

/// Throws if a sampled document lacks a reference summary.
EvalReport evaluate(std::span<const Document> docs, std::span<const SummarySystem> systems,
                    std::size_t sample_size, std::uint64_t seed, const std::string& dataset,
                    const Budgets& budgets);
EvalReport evaluate(const std::string& dataset_path, std::span<const SummarySystem> systems,
                    std::size_t sample_size, std::uint64_t seed, const Budgets& budgets);

std::string format_report(const EvalReport& report);
nlohmann::json report_json(const EvalReport& report);

}  // namespace urlcomsum
