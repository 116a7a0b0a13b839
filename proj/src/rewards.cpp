#include "urlcomsum/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace urlcomsum {

TFDistribution tf_distribution(std::span<const int> token_ids, const StopwordSet& stopwords,
                               const Vocab& vocab) {
  std::map<int, double> counts;
  double total = 0.0;
  for (int id : token_ids) {
    if (id == Vocab::kPad || id == Vocab::kUnk) continue;
    if (stopwords.contains(vocab.token(id))) continue;
    counts[id] += 1.0;
    total += 1.0;
  }
  if (counts.empty()) throw std::invalid_argument("empty distribution");
  TFDistribution out;
  out.weights.resize(static_cast<Eigen::Index>(counts.size()));
  Eigen::Index k = 0;
  for (const auto& [id, c] : counts) {
    out.support.push_back(id);
    out.weights(k++) = c / total;
  }
  return out;
}

Eigen::MatrixXd cost_matrix(std::span<const int> support_d, std::span<const int> support_s,
                            const EmbeddingTable& emb) {
  Eigen::MatrixXd c(static_cast<Eigen::Index>(support_d.size()),
                    static_cast<Eigen::Index>(support_s.size()));
  for (std::size_t i = 0; i < support_d.size(); ++i) {
    const auto vi = emb.matrix.row(support_d[i]);
    const double ni = vi.norm();
    for (std::size_t j = 0; j < support_s.size(); ++j) {
      double cosine = 0.0;
      if (support_d[i] == support_s[j]) {
        cosine = 1.0;
      } else {
        const auto vj = emb.matrix.row(support_s[j]);
        const double nj = vj.norm();
        if (ni > 0.0 && nj > 0.0) cosine = std::clamp(vi.dot(vj) / (ni * nj), -1.0, 1.0);
      }
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0 - cosine;
    }
  }
  return c;
}

TransportPlan solve_ot(const TFDistribution& p, const TFDistribution& q, const Eigen::MatrixXd& cost,
                       const Vocab& vocab, const OtConfig& config) {
  const OtResult r = solve_transport(p.weights, q.weights, cost, config.solver, config.sinkhorn);
  TransportPlan out;
  for (int id : p.support) out.doc_tokens.push_back(vocab.token(id));
  for (int id : q.support) out.sum_tokens.push_back(vocab.token(id));
  out.cost = cost;
  out.plan = r.plan;
  out.distance = r.distance;
  out.iterations = r.iterations;
  out.marginal_error = r.marginal_error;
  out.converged = r.converged;
  out.solver = r.solver;
  return out;
}

namespace {

void check_context(const CoverageContext& ctx) {
  if (ctx.vocab == nullptr || ctx.emb == nullptr || ctx.stopwords == nullptr)
    throw std::invalid_argument("coverage: incomplete context");
}

}  // namespace

TransportPlan coverage_plan(std::span<const std::string> doc_tokens,
                            std::span<const std::string> summary_tokens, const CoverageContext& ctx) {
  check_context(ctx);
  const TFDistribution p = tf_distribution(ctx.vocab->ids(doc_tokens), *ctx.stopwords, *ctx.vocab);
  const TFDistribution q =
      tf_distribution(ctx.vocab->ids(summary_tokens), *ctx.stopwords, *ctx.vocab);
  return solve_ot(p, q, cost_matrix(p.support, q.support, *ctx.emb), *ctx.vocab, ctx.ot);
}

CoverageResult coverage_reward(std::span<const std::string> doc_tokens,
                               std::span<const std::string> summary_tokens,
                               const CoverageContext& ctx) {
  check_context(ctx);
  const auto doc_ids = ctx.vocab->ids(doc_tokens);
  const auto sum_ids = ctx.vocab->ids(summary_tokens);
  TFDistribution p, q;
  try {
    p = tf_distribution(doc_ids, *ctx.stopwords, *ctx.vocab);
    q = tf_distribution(sum_ids, *ctx.stopwords, *ctx.vocab);
  } catch (const std::invalid_argument&) {
    return {0.0, true};
  }
  const TransportPlan plan = solve_ot(p, q, cost_matrix(p.support, q.support, *ctx.emb),
                                      *ctx.vocab, ctx.ot);
  return {1.0 - plan.distance, false};
}

double slor(std::span<const std::string> summary_tokens, const LanguageModelHandle& lm) {
  if (summary_tokens.empty()) throw std::invalid_argument("slor: empty summary");
  if (!lm.scorer || !lm.unigram) throw std::invalid_argument("slor: incomplete language model");
  const double lp = lm.scorer->log_prob(summary_tokens);
  const double lu = lm.unigram->log_prob(summary_tokens);
  return (lp - lu) / static_cast<double>(summary_tokens.size());
}

RewardBreakdown total_reward(std::span<const std::string> doc_tokens,
                             std::span<const std::string> summary_tokens, const RewardContext& ctx) {
  if (ctx.weights.coverage < 0.0 || ctx.weights.fluency < 0.0)
    throw std::invalid_argument("reward weights must be non-negative");
  if (ctx.lm == nullptr) throw std::invalid_argument("total_reward: missing language model");
  RewardBreakdown out;
  out.weights = ctx.weights;
  const CoverageResult cov = coverage_reward(doc_tokens, summary_tokens, ctx.coverage);
  out.coverage = cov.reward;
  out.degenerate = cov.degenerate;
  out.fluency = slor(summary_tokens, *ctx.lm);
  out.total = ctx.weights.coverage * out.coverage + ctx.weights.fluency * out.fluency;
  return out;
}

void write_plan_matrix(const TransportPlan& plan, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write transport plan: " + path.string());
  out << "doc\\summary";
  for (const auto& t : plan.sum_tokens) out << '\t' << t;
  out << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < plan.plan.rows(); ++i) {
    out << plan.doc_tokens.at(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < plan.plan.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", plan.plan(i, j));
      out << '\t' << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("error writing transport plan: " + path.string());
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

TransportPlan read_plan_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read transport plan: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("transport plan: missing header");
  TransportPlan out;
  auto header = split_tabs(line);
  out.sum_tokens.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_tabs(line);
    if (cells.size() != out.sum_tokens.size() + 1)
      throw std::runtime_error("transport plan: ragged row for token " + cells.front());
    out.doc_tokens.push_back(cells.front());
    std::vector<double> vals;
    for (std::size_t k = 1; k < cells.size(); ++k) vals.push_back(std::strtod(cells[k].c_str(), nullptr));
    rows.push_back(std::move(vals));
  }
  out.plan.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(out.sum_tokens.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      out.plan(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return out;
}

void write_plan_heatmap(const TransportPlan& plan, const std::filesystem::path& path, int cell) {
  if (cell < 1) throw std::invalid_argument("heatmap cell size must be >= 1");
  const auto rows = plan.plan.rows(), cols = plan.plan.cols();
  const double mx = rows * cols > 0 ? plan.plan.maxCoeff() : 0.0;
  const auto width = cols * cell, height = rows * cell;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write heatmap: " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  std::vector<unsigned char> line(static_cast<std::size_t>(width));
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double v = mx > 0.0 ? plan.plan(i, j) / mx : 0.0;
      const auto px = static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
      std::fill_n(line.begin() + j * cell, cell, px);
    }
    for (int r = 0; r < cell; ++r) out.write(reinterpret_cast<const char*>(line.data()), width);
  }
  if (!out) throw std::runtime_error("error writing heatmap: " + path.string());
}

std::vector<std::filesystem::path> export_transport_plan(const TransportPlan& plan,
                                                         const std::filesystem::path& stem,
                                                         bool heatmap) {
  std::vector<std::filesystem::path> written;
  auto tsv = stem;
  tsv += ".tsv";
  write_plan_matrix(plan, tsv);
  written.push_back(tsv);
  if (heatmap) {
    auto pgm = stem;
    pgm += ".pgm";
    write_plan_heatmap(plan, pgm);
    written.push_back(pgm);
  }
  return written;
}

}  // namespace urlcomsum
