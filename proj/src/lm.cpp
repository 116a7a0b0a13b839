#include "urlcomsum/lm.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_set>

namespace urlcomsum {

namespace {

constexpr char kSep = '\x1f';
const std::string kBos = "<s>";

std::string join(std::span<const std::string> toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out += kSep;
    out += toks[i];
  }
  return out;
}

double floor_log(double p) { return p > 0.0 ? std::max(std::log(p), kLogProbFloor) : kLogProbFloor; }

}  // namespace

std::vector<Tokens> corpus_sentences(std::span<const Document> corpus) {
  std::vector<Tokens> out;
  for (const auto& doc : corpus)
    for (const auto& s : doc.sentences) out.push_back(s);
  return out;
}

UnigramTable::UnigramTable(std::span<const Tokens> sentences) {
  for (const auto& s : sentences)
    for (const auto& t : s) {
      ++counts_[t];
      ++total_;
    }
}

double UnigramTable::log_prob(const std::string& token) const {
  auto it = counts_.find(token);
  const double c = it == counts_.end() ? 0.0 : static_cast<double>(it->second);
  return floor_log((c + 1.0) / (static_cast<double>(total_) + static_cast<double>(vocab_size())));
}

double UnigramTable::log_prob(std::span<const std::string> tokens) const {
  double s = 0.0;
  for (const auto& t : tokens) s += log_prob(t);
  return s;
}

KneserNeyLM::KneserNeyLM(std::span<const Tokens> sentences, int order) : order_(order) {
  if (order < 1) throw std::invalid_argument("KneserNeyLM: order must be >= 1");
  counts_.resize(static_cast<std::size_t>(order));
  contexts_.resize(static_cast<std::size_t>(order));

  std::unordered_set<std::string> types;
  // Distinct n-grams per order, for continuation counts.
  std::vector<std::set<std::string>> distinct(static_cast<std::size_t>(order + 1));
  std::vector<std::string> padded;
  for (const auto& s : sentences) {
    padded.assign(static_cast<std::size_t>(order - 1), kBos);
    padded.insert(padded.end(), s.begin(), s.end());
    for (std::size_t t = static_cast<std::size_t>(order - 1); t < padded.size(); ++t) {
      types.insert(padded[t]);
      for (int n = 1; n <= order; ++n) {
        const std::span<const std::string> gram(&padded[t + 1 - static_cast<std::size_t>(n)],
                                                static_cast<std::size_t>(n));
        if (n == order) counts_[static_cast<std::size_t>(n - 1)][join(gram)] += 1.0;
        if (n >= 2) distinct[static_cast<std::size_t>(n)].insert(join(gram));
      }
    }
  }
  vocab_size_ = types.size() + 1;

  // Continuation count of an n-gram: distinct left extensions seen.
  for (int n = 1; n < order; ++n) {
    auto& target = counts_[static_cast<std::size_t>(n - 1)];
    for (const auto& g : distinct[static_cast<std::size_t>(n + 1)]) {
      const auto cut = g.find(kSep);
      target[g.substr(cut + 1)] += 1.0;
    }
  }

  discounts_.resize(static_cast<std::size_t>(order));
  for (int n = 1; n <= order; ++n) {
    double n1 = 0, n2 = 0;
    auto& ctx = contexts_[static_cast<std::size_t>(n - 1)];
    for (const auto& [g, c] : counts_[static_cast<std::size_t>(n - 1)]) {
      if (c == 1.0) ++n1;
      if (c == 2.0) ++n2;
      const auto cut = g.rfind(kSep);
      auto& st = ctx[cut == std::string::npos ? std::string() : g.substr(0, cut)];
      st.total += c;
      st.types += 1.0;
    }
    double d = (n1 > 0 && n2 > 0) ? n1 / (n1 + 2.0 * n2) : 0.75;
    discounts_[static_cast<std::size_t>(n - 1)] = std::clamp(d, 0.05, 0.95);
  }
}

double KneserNeyLM::prob_order(int n, std::span<const std::string> context,
                               const std::string& word) const {
  const auto& counts = counts_[static_cast<std::size_t>(n - 1)];
  const auto& contexts = contexts_[static_cast<std::size_t>(n - 1)];
  const double d = discounts_[static_cast<std::size_t>(n - 1)];
  const auto ctx = context.subspan(context.size() - static_cast<std::size_t>(n - 1));
  const std::string ctx_key = join(ctx);

  const double lower = n == 1 ? 1.0 / static_cast<double>(vocab_size_)
                              : prob_order(n - 1, context, word);
  auto st = contexts.find(ctx_key);
  if (st == contexts.end() || st->second.total <= 0.0) return lower;
  const std::string gram = ctx_key.empty() ? word : ctx_key + kSep + word;
  auto it = counts.find(gram);
  const double c = it == counts.end() ? 0.0 : it->second;
  return std::max(c - d, 0.0) / st->second.total + d * st->second.types / st->second.total * lower;
}

double KneserNeyLM::prob(std::span<const std::string> context, const std::string& word) const {
  if (context.size() < static_cast<std::size_t>(order_ - 1))
    throw std::invalid_argument("KneserNeyLM: context shorter than order - 1");
  return prob_order(order_, context.subspan(context.size() - static_cast<std::size_t>(order_ - 1)),
                    word);
}

double KneserNeyLM::log_prob(std::span<const std::string> tokens) const {
  std::vector<std::string> padded(static_cast<std::size_t>(order_ - 1), kBos);
  padded.insert(padded.end(), tokens.begin(), tokens.end());
  double s = 0.0;
  for (std::size_t t = static_cast<std::size_t>(order_ - 1); t < padded.size(); ++t) {
    const std::span<const std::string> ctx(padded.data() + t + 1 - static_cast<std::size_t>(order_),
                                           static_cast<std::size_t>(order_ - 1));
    s += floor_log(prob_order(order_, ctx, padded[t]));
  }
  return s;
}

LanguageModelHandle LanguageModelHandle::train(std::span<const Document> corpus, int order) {
  const auto sentences = corpus_sentences(corpus);
  if (sentences.empty()) throw std::invalid_argument("language model: empty corpus");
  LanguageModelHandle h;
  h.scorer = std::make_shared<KneserNeyLM>(sentences, order);
  h.unigram = std::make_shared<UnigramTable>(sentences);
  return h;
}

LanguageModelHandle LanguageModelHandle::unigram_only(std::span<const Document> corpus) {
  const auto sentences = corpus_sentences(corpus);
  LanguageModelHandle h;
  auto table = std::make_shared<UnigramTable>(sentences);
  h.scorer = table;
  h.unigram = table;
  return h;
}

}  // namespace urlcomsum
