#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "urlcomsum/corpus.hpp"
#include "urlcomsum/lm.hpp"
#include "urlcomsum/ot.hpp"
#include "urlcomsum/stopwords.hpp"

namespace urlcomsum {

/// Normalized term frequencies over non-stopword, non-special token ids.
/// Support is sorted by id.
struct TFDistribution {
  std::vector<int> support;
  Eigen::VectorXd weights;

  std::size_t size() const { return support.size(); }
};

/// Throws "empty distribution" when every token is filtered.
TFDistribution tf_distribution(std::span<const int> token_ids, const StopwordSet& stopwords,
                               const Vocab& vocab);

/// c_ij = 1 - cos(v_i, v_j). A zero-norm embedding has cosine 0 (cost 1)
/// against anything but the same id.
Eigen::MatrixXd cost_matrix(std::span<const int> support_d, std::span<const int> support_s,
                            const EmbeddingTable& emb);

struct TransportPlan {
  std::vector<std::string> doc_tokens;  // rows
  std::vector<std::string> sum_tokens;  // columns
  Eigen::MatrixXd cost;
  Eigen::MatrixXd plan;
  double distance = 0.0;
  int iterations = 0;
  double marginal_error = 0.0;
  bool converged = true;
  OtSolver solver = OtSolver::sinkhorn;
};

struct OtConfig {
  OtSolver solver = OtSolver::sinkhorn;
  SinkhornConfig sinkhorn;
};

TransportPlan solve_ot(const TFDistribution& p, const TFDistribution& q, const Eigen::MatrixXd& cost,
                       const Vocab& vocab, const OtConfig& config = {});

struct CoverageContext {
  const Vocab* vocab = nullptr;
  const EmbeddingTable* emb = nullptr;
  const StopwordSet* stopwords = nullptr;
  OtConfig ot;
};

struct CoverageResult {
  double reward = 0.0;
  bool degenerate = false;  // an empty distribution; reward forced to 0
};

CoverageResult coverage_reward(std::span<const std::string> doc_tokens,
                               std::span<const std::string> summary_tokens,
                               const CoverageContext& ctx);

/// Coverage and plan for interpretability; throws on empty distributions.
TransportPlan coverage_plan(std::span<const std::string> doc_tokens,
                            std::span<const std::string> summary_tokens, const CoverageContext& ctx);

/// (log P_LM(S) - log P_U(S)) / |S|. Throws on an empty summary.
double slor(std::span<const std::string> summary_tokens, const LanguageModelHandle& lm);

struct RewardWeights {
  double coverage = 1.0;
  double fluency = 2.0;
};

struct RewardBreakdown {
  double coverage = 0.0;
  double fluency = 0.0;
  double total = 0.0;
  RewardWeights weights;
  bool degenerate = false;
};

struct RewardContext {
  CoverageContext coverage;
  const LanguageModelHandle* lm = nullptr;
  RewardWeights weights;
};

/// w_cov * coverage(D, S) + w_flu * slor(S), with coverage against the full
/// document.
RewardBreakdown total_reward(std::span<const std::string> doc_tokens,
                             std::span<const std::string> summary_tokens,
                             const RewardContext& ctx);

/// Writes a tab-separated matrix: a header row of summary tokens, then one
/// row per document token holding its label and plan values. Values use 17
/// significant digits so the file parses back to identical doubles.
void write_plan_matrix(const TransportPlan& plan, const std::filesystem::path& path);
TransportPlan read_plan_matrix(const std::filesystem::path& path);

/// Binary PGM heatmap; each cell is `cell` pixels square and its intensity is
/// plan / max(plan).
void write_plan_heatmap(const TransportPlan& plan, const std::filesystem::path& path, int cell = 8);

/// Writes <stem>.tsv and, if requested, <stem>.pgm. Returns the paths written.
std::vector<std::filesystem::path> export_transport_plan(const TransportPlan& plan,
                                                         const std::filesystem::path& stem,
                                                         bool heatmap = true);

}  // namespace urlcomsum
