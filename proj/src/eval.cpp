#include "urlcomsum/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <numeric>
#include <stdexcept>

#include "urlcomsum/rng.hpp"

namespace urlcomsum {

namespace {

Tokens lowered(std::span<const std::string> toks) {
  Tokens out(toks.begin(), toks.end());
  for (auto& t : out)
    for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

PrecisionRecall from_counts(double overlap, double hyp_total, double ref_total) {
  PrecisionRecall pr;
  pr.precision = hyp_total > 0 ? overlap / hyp_total : 0.0;
  pr.recall = ref_total > 0 ? overlap / ref_total : 0.0;
  const double s = pr.precision + pr.recall;
  pr.f = s > 0 ? 2.0 * pr.precision * pr.recall / s : 0.0;
  return pr;
}

std::map<std::vector<std::string>, int> ngram_counts(std::span<const std::string> toks, int n) {
  std::map<std::vector<std::string>, int> out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i)
    ++out[std::vector<std::string>(toks.begin() + static_cast<long>(i), toks.begin() + static_cast<long>(i) + n)];
  return out;
}

}  // namespace

PrecisionRecall rouge_n(std::span<const std::string> hyp, std::span<const std::string> ref, int n) {
  if (n < 1) throw std::invalid_argument("rouge_n: n must be >= 1");
  const Tokens h = lowered(hyp), r = lowered(ref);
  const auto hc = ngram_counts(h, n), rc = ngram_counts(r, n);
  double overlap = 0, ht = 0, rt = 0;
  for (const auto& [g, c] : hc) {
    ht += c;
    if (auto it = rc.find(g); it != rc.end()) overlap += std::min(c, it->second);
  }
  for (const auto& [g, c] : rc) rt += c;
  return from_counts(overlap, ht, rt);
}

PrecisionRecall rouge_l(std::span<const std::string> hyp, std::span<const std::string> ref) {
  const Tokens h = lowered(hyp), r = lowered(ref);
  std::vector<int> prev(r.size() + 1, 0), cur(r.size() + 1, 0);
  for (std::size_t i = 1; i <= h.size(); ++i) {
    for (std::size_t j = 1; j <= r.size(); ++j)
      cur[j] = h[i - 1] == r[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return from_counts(prev[r.size()], static_cast<double>(h.size()), static_cast<double>(r.size()));
}

RougeScores rouge(std::span<const std::string> hyp, std::span<const std::string> ref) {
  if (ref.empty()) throw std::invalid_argument("rouge: empty reference");
  if (hyp.empty()) return {};
  return {100.0 * rouge_n(hyp, ref, 1).f, 100.0 * rouge_n(hyp, ref, 2).f, 100.0 * rouge_l(hyp, ref).f};
}

SummaryCandidate lead_baseline(const Document& doc, int max_sentences_out) {
  if (max_sentences_out < 1) throw std::invalid_argument("lead: L_E must be >= 1");
  if (doc.empty()) throw std::invalid_argument("empty document");
  SummaryCandidate out;
  out.level = SummaryLevel::sentence;
  const int k = std::min(max_sentences_out, static_cast<int>(doc.sentences.size()));
  for (int s = 0; s < k; ++s) {
    out.pointers.indices.push_back(s);
    const auto& sent = doc.sentences[static_cast<std::size_t>(s)];
    for (std::size_t w = 0; w < sent.size(); ++w) {
      out.tokens.push_back(sent[w]);
      out.positions.push_back({s, static_cast<int>(w)});
    }
  }
  out.text = detokenize(out.tokens);
  return out;
}

SummaryCandidate lead_word_baseline(const Document& doc, int max_words_out) {
  if (max_words_out < 1) throw std::invalid_argument("lead-word: L_C must be >= 1");
  if (doc.empty()) throw std::invalid_argument("empty document");
  SummaryCandidate out;
  out.level = SummaryLevel::word;
  int flat = 0;
  for (std::size_t s = 0; s < doc.sentences.size() && flat < max_words_out; ++s) {
    const auto& sent = doc.sentences[s];
    for (std::size_t w = 0; w < sent.size() && flat < max_words_out; ++w, ++flat) {
      out.pointers.indices.push_back(flat);
      out.tokens.push_back(sent[w]);
      out.positions.push_back({static_cast<int>(s), static_cast<int>(w)});
    }
  }
  out.text = detokenize(out.tokens);
  return out;
}

bool is_compressive_subset(const SummaryCandidate& extractive, const SummaryCandidate& compressive,
                           const Document& doc, int max_words_out) {
  if (compressive.tokens.size() != compressive.positions.size()) return false;
  if (static_cast<int>(compressive.tokens.size()) > max_words_out) return false;
  const std::vector<int>& chosen = extractive.pointers.indices;
  for (std::size_t i = 0; i < compressive.positions.size(); ++i) {
    const TokenPosition& p = compressive.positions[i];
    if (i > 0 && !(compressive.positions[i - 1] < p)) return false;
    if (std::find(chosen.begin(), chosen.end(), p.sentence) == chosen.end()) return false;
    if (p.sentence < 0 || static_cast<std::size_t>(p.sentence) >= doc.sentences.size()) return false;
    const auto& sent = doc.sentences[static_cast<std::size_t>(p.sentence)];
    if (p.word < 0 || static_cast<std::size_t>(p.word) >= sent.size()) return false;
    if (sent[static_cast<std::size_t>(p.word)] != compressive.tokens[i]) return false;
  }
  return true;
}

SummarySystem lead_system(const Budgets& budgets) {
  const int k = budgets.sentences;
  return {"lead", [k](const Document& d) { return std::vector<SummaryCandidate>{lead_baseline(d, k)}; },
          {"LEAD"}, false};
}

SummarySystem lead_word_system(const Budgets& budgets) {
  const int k = budgets.words;
  return {"leadword",
          [k](const Document& d) { return std::vector<SummaryCandidate>{lead_word_baseline(d, k)}; },
          {"LEAD-WORD"}, false};
}

SummarySystem model_system(std::shared_ptr<const ModelBundle> bundle, const Budgets& budgets,
                           DecodeMode mode, std::uint64_t seed, std::string label) {
  auto run = [bundle, budgets, mode, seed](const Document& d) {
    SummaryPair p = summarize(d, bundle->vocab, bundle->embeddings, bundle->model, budgets, mode, seed);
    return std::vector<SummaryCandidate>{std::move(p.extractive), std::move(p.compressive)};
  };
  return {"model", run, {label + " Ext.", label + " Ext.+Com."}, true};
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t sample_size, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (sample_size >= n) return idx;
  Rng rng(seed);
  for (std::size_t i = 0; i < sample_size; ++i)
    std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
  idx.resize(sample_size);
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

EvalReport evaluate(std::span<const Document> docs, std::span<const SummarySystem> systems,
                    std::size_t sample_size, std::uint64_t seed, const std::string& dataset,
                    const Budgets& budgets) {
  if (sample_size == 0) throw std::invalid_argument("evaluate: sample size must be > 0");
  if (systems.empty()) throw std::invalid_argument("evaluate: no systems");
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < docs.size(); ++i)
    if (!docs[i].empty()) usable.push_back(i);
  if (usable.empty()) throw std::invalid_argument("evaluate: dataset has no usable documents");
  const auto picked = sample_indices(usable.size(), sample_size, seed);

  EvalReport report;
  report.dataset = dataset;
  report.sample_size = picked.size();
  report.seed = seed;
  std::string key = dataset + "|" + std::to_string(sample_size) + "|" + std::to_string(seed) + "|" +
                    std::to_string(budgets.sentences) + "|" + std::to_string(budgets.words);
  std::vector<RougeScores> sums;
  for (const auto& sys : systems) {
    key += "|" + sys.name;
    for (const auto& r : sys.rows) {
      report.rows.push_back({r, {}});
      sums.emplace_back();
    }
  }
  report.config_hash = fnv1a_hex(key);

  for (std::size_t k : picked) {
    const Document& doc = docs[usable[k]];
    if (!doc.source_summary || doc.source_summary->empty())
      throw std::invalid_argument("evaluate: document " + doc.id + " has no reference summary");
    const Tokens ref = tokenize(*doc.source_summary);
    if (ref.empty()) throw std::invalid_argument("evaluate: document " + doc.id + " has an empty reference");
    std::size_t row = 0;
    for (const auto& sys : systems) {
      const auto cands = sys.run(doc);
      if (cands.size() != sys.rows.size()) throw std::logic_error("evaluate: system row count mismatch");
      for (const auto& c : cands) {
        const RougeScores s = rouge(c.tokens, ref);
        sums[row].rouge1_f += s.rouge1_f;
        sums[row].rouge2_f += s.rouge2_f;
        sums[row].rougeL_f += s.rougeL_f;
        ++row;
      }
      if (sys.compressive_last && cands.size() >= 2) {
        ++report.compressive_checked;
        if (!is_compressive_subset(cands[cands.size() - 2], cands.back(), doc, budgets.words))
          ++report.compressive_violations;
      }
    }
  }
  const double n = static_cast<double>(picked.size());
  for (std::size_t r = 0; r < sums.size(); ++r)
    report.rows[r].scores = {sums[r].rouge1_f / n, sums[r].rouge2_f / n, sums[r].rougeL_f / n};
  return report;
}

EvalReport evaluate(const std::string& dataset_path, std::span<const SummarySystem> systems,
                    std::size_t sample_size, std::uint64_t seed, const Budgets& budgets) {
  const auto docs = read_jsonl(dataset_path, /*keep_summaries=*/true);
  return evaluate(docs, systems, sample_size, seed, dataset_path, budgets);
}

std::string format_report(const EvalReport& report) {
  std::string out = "Dataset: " + report.dataset + " (sample " + std::to_string(report.sample_size) +
                    ", seed " + std::to_string(report.seed) + ", config " + report.config_hash + ")\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %7s %7s %7s\n", "System", "R-1", "R-2", "R-L");
  out += line;
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%-28s %7.2f %7.2f %7.2f\n", r.system.c_str(), r.scores.rouge1_f,
                  r.scores.rouge2_f, r.scores.rougeL_f);
    out += line;
  }
  if (report.compressive_checked > 0)
    out += "Compressive check: " + std::to_string(report.compressive_violations) + " violations in " +
           std::to_string(report.compressive_checked) + " summaries\n";
  return out;
}

nlohmann::json report_json(const EvalReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"system", r.system},
                    {"rouge1_f", r.scores.rouge1_f},
                    {"rouge2_f", r.scores.rouge2_f},
                    {"rougeL_f", r.scores.rougeL_f}});
  return {{"dataset", report.dataset},
          {"sample_size", report.sample_size},
          {"seed", report.seed},
          {"config_hash", report.config_hash},
          {"rows", rows},
          {"compressive_checked", report.compressive_checked},
          {"compressive_violations", report.compressive_violations}};
}

}  // namespace urlcomsum
