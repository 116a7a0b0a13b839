#include <gtest/gtest.h>

#include <cmath>

#include "urlcomsum/lm.hpp"
#include "urlcomsum/rewards.hpp"
#include "support/synthetic.hpp"

using namespace urlcomsum;

namespace {

std::vector<Document> toy_corpus() {
  std::vector<Document> docs(1);
  docs[0].sentences = {{"a", "b"}, {"a", "b"}, {"a", "c"}, {"b", "c"}, {"c", "a"}};
  return docs;
}

}  // namespace

// Counts worked out by hand for the corpus above with one "<s>" pad:
// bigrams <s>a:3 ab:2 ac:1 <s>b:1 bc:1 <s>c:1 ca:1, so the top-order discount
// is 5 / (5 + 2 * 1). Continuation counts a:2 b:2 c:3 have no singletons,
// which selects the 0.75 fallback. Three seen types plus the unknown slot.
TEST(KneserNey, BigramMatchesHandComputation) {
  const auto docs = toy_corpus();
  const auto sentences = corpus_sentences(docs);
  const KneserNeyLM lm(sentences, 2);
  const double d2 = 5.0 / 7.0, d1 = 0.75, v = 4.0;
  EXPECT_NEAR(lm.discount(2), d2, 1e-15);
  EXPECT_NEAR(lm.discount(1), d1, 1e-15);
  const double p1_a = (2 - d1) / 7.0 + d1 * 3.0 / 7.0 / v;
  const double p1_b = (2 - d1) / 7.0 + d1 * 3.0 / 7.0 / v;
  const double p_a_bos = (3 - d2) / 5.0 + d2 * 3.0 / 5.0 * p1_a;
  const double p_b_a = (2 - d2) / 3.0 + d2 * 2.0 / 3.0 * p1_b;
  const Tokens s{"a", "b"};
  EXPECT_NEAR(lm.log_prob(s), std::log(p_a_bos) + std::log(p_b_a), 1e-9);

  LanguageModelHandle h;
  h.scorer = std::make_shared<KneserNeyLM>(sentences, 2);
  h.unigram = std::make_shared<UnigramTable>(sentences);
  const double lu = std::log(5.0 / 14.0) + std::log(4.0 / 14.0);
  EXPECT_NEAR(slor(s, h), (std::log(p_a_bos) + std::log(p_b_a) - lu) / 2.0, 1e-9);
}

TEST(KneserNey, DistributionNormalizesOverVocabulary) {
  const auto docs = fixtures::synthetic_corpus(40, 5);
  const auto sentences = corpus_sentences(docs);
  const KneserNeyLM lm(sentences, 3);
  std::set<std::string> types;
  for (const auto& s : sentences) types.insert(s.begin(), s.end());
  const std::vector<Tokens> contexts = {{"<s>", "<s>"}, {"<s>", "the"}, {"the", "storm"}, {"zzz", "qqq"}};
  for (const auto& ctx : contexts) {
    double total = 0.0;
    for (const auto& t : types) total += lm.prob(ctx, t);
    total += lm.prob(ctx, "never-seen-token");  // the unknown slot
    EXPECT_NEAR(total, 1.0, 1e-9) << ctx[0] << " " << ctx[1];
  }
}

TEST(KneserNey, UnseenTokensFloored) {
  const auto docs = toy_corpus();
  const KneserNeyLM lm(corpus_sentences(docs), 3);
  const Tokens s{"x", "y", "z"};
  const double lp = lm.log_prob(s);
  EXPECT_TRUE(std::isfinite(lp));
  EXPECT_GE(lp, 3 * kLogProbFloor);
}

TEST(Unigram, AddOneSmoothing) {
  const auto docs = toy_corpus();
  const UnigramTable u(corpus_sentences(docs));
  EXPECT_EQ(u.vocab_size(), 4u);
  EXPECT_NEAR(u.log_prob(std::string("a")), std::log(5.0 / 14.0), 1e-15);
  EXPECT_NEAR(u.log_prob(std::string("unseen")), std::log(1.0 / 14.0), 1e-15);
  double total = 0;
  for (const char* t : {"a", "b", "c", "unseen"}) total += std::exp(u.log_prob(std::string(t)));
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Slor, ZeroWhenModelIsUnigram) {
  const auto docs = fixtures::synthetic_corpus(20, 2);
  const auto h = LanguageModelHandle::unigram_only(docs);
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto& d = docs[uniform_index(rng, docs.size())];
    const Tokens flat = d.flat_tokens();
    const Tokens s(flat.begin(), flat.begin() + 1 + static_cast<long>(uniform_index(rng, flat.size())));
    EXPECT_NEAR(slor(s, h), 0.0, 1e-9);
  }
}

TEST(Slor, EmptySummaryThrows) {
  const auto h = LanguageModelHandle::unigram_only(toy_corpus());
  EXPECT_THROW(slor(Tokens{}, h), std::invalid_argument);
}

namespace {

// Scores every token at exactly its unigram probability except for one
// designated prefix, so appending neutral tokens must rescale the ratio.
class FixedScorer final : public SequenceScorer {
 public:
  FixedScorer(std::shared_ptr<const UnigramTable> u, double bonus) : u_(std::move(u)), bonus_(bonus) {}
  double log_prob(std::span<const std::string> tokens) const override {
    return u_->log_prob(tokens) + bonus_;
  }

 private:
  std::shared_ptr<const UnigramTable> u_;
  double bonus_;
};

}  // namespace

TEST(Slor, PerTokenNormalization) {
  const auto docs = toy_corpus();
  auto u = std::make_shared<UnigramTable>(corpus_sentences(docs));
  LanguageModelHandle h;
  h.unigram = u;
  h.scorer = std::make_shared<FixedScorer>(u, 0.6);
  const Tokens s2{"a", "b"}, s3{"a", "b", "c"};
  EXPECT_NEAR(slor(s2, h), 0.3, 1e-12);
  EXPECT_NEAR(slor(s3, h), 0.2, 1e-12);
}
