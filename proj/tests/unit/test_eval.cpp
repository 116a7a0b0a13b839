#include <gtest/gtest.h>

#include "urlcomsum/eval.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

using namespace urlcomsum;

namespace {

Tokens toks(const std::string& s) { return tokenize(s); }

Document with_reference(const std::string& text, const std::string& reference) {
  Document d = segment_document(text);
  d.id = "d";
  d.source_summary = reference;
  return d;
}

// Longest common subsequence by trying every subset of the hypothesis.
std::size_t brute_force_lcs(const Tokens& a, const Tokens& b) {
  std::size_t best = 0;
  for (unsigned mask = 0; mask < (1u << a.size()); ++mask) {
    std::size_t j = 0, len = 0;
    bool ok = true;
    for (std::size_t i = 0; i < a.size() && ok; ++i) {
      if (!(mask & (1u << i))) continue;
      while (j < b.size() && b[j] != a[i]) ++j;
      if (j == b.size()) ok = false;
      else ++j, ++len;
    }
    if (ok) best = std::max(best, len);
  }
  return best;
}

}  // namespace

TEST(Rouge, HandComputedExample) {
  const RougeScores s = rouge(toks("the cat sat"), toks("the cat"));
  EXPECT_NEAR(s.rouge1_f, 80.0, 1e-9);
  EXPECT_NEAR(s.rouge2_f, 200.0 / 3.0, 1e-9);
  EXPECT_NEAR(s.rougeL_f, 80.0, 1e-9);
  const PrecisionRecall r1 = rouge_n(toks("the cat sat"), toks("the cat"), 1);
  EXPECT_NEAR(r1.precision, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r1.recall, 1.0, 1e-15);
}

TEST(Rouge, IdentityAndDisjoint) {
  const Tokens t = toks("Storm hits the coast, residents flee.");
  const RougeScores same = rouge(t, t);
  EXPECT_DOUBLE_EQ(same.rouge1_f, 100.0);
  EXPECT_DOUBLE_EQ(same.rouge2_f, 100.0);
  EXPECT_DOUBLE_EQ(same.rougeL_f, 100.0);
  const RougeScores none = rouge(toks("alpha beta"), toks("gamma delta"));
  EXPECT_EQ(none.rouge1_f, 0.0);
  EXPECT_EQ(none.rouge2_f, 0.0);
  EXPECT_EQ(none.rougeL_f, 0.0);
}

TEST(Rouge, ClippedCountsCaseAndPunctuation) {
  const PrecisionRecall r = rouge_n(toks("the the the"), toks("the cat"), 1);
  EXPECT_NEAR(r.precision, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.recall, 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(rouge(Tokens{"The", "Cat"}, Tokens{"the", "cat"}).rouge1_f, 100.0);
  EXPECT_LT(rouge(toks("cat ."), toks("cat")).rouge1_f, 100.0);
}

TEST(Rouge, EmptyInputs) {
  const RougeScores s = rouge(Tokens{}, toks("the cat"));
  EXPECT_EQ(s.rouge1_f, 0.0);
  EXPECT_EQ(s.rougeL_f, 0.0);
  EXPECT_THROW(rouge(toks("the cat"), Tokens{}), std::invalid_argument);
}

TEST(Rouge, ContainingReferenceGivesFullRecall) {
  const Tokens ref = toks("police arrest a suspect");
  const Tokens hyp = toks("late on friday police arrest a suspect near the court");
  EXPECT_DOUBLE_EQ(rouge_n(hyp, ref, 1).recall, 1.0);
  EXPECT_DOUBLE_EQ(rouge_l(hyp, ref).recall, 1.0);
}

TEST(Rouge, LcsMatchesBruteForceAndBounds) {
  Rng rng(3);
  const Tokens alphabet{"a", "b", "c", "d"};
  for (int trial = 0; trial < 300; ++trial) {
    Tokens a(1 + uniform_index(rng, 8)), b(1 + uniform_index(rng, 8));
    for (auto& t : a) t = fixtures::pick(rng, alphabet);
    for (auto& t : b) t = fixtures::pick(rng, alphabet);
    const PrecisionRecall l = rouge_l(a, b);
    const double lcs = static_cast<double>(brute_force_lcs(a, b));
    EXPECT_NEAR(l.recall, lcs / static_cast<double>(b.size()), 1e-12);
    EXPECT_NEAR(l.precision, lcs / static_cast<double>(a.size()), 1e-12);
    const RougeScores s = rouge(a, b);
    for (double v : {s.rouge1_f, s.rouge2_f, s.rougeL_f}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 100.0);
    }
    const PrecisionRecall r1 = rouge_n(a, b, 1);
    const double f = r1.precision + r1.recall > 0 ? 2 * r1.precision * r1.recall / (r1.precision + r1.recall) : 0;
    EXPECT_NEAR(s.rouge1_f, 100.0 * f, 1e-9);
  }
}

TEST(Lead, FirstSentences) {
  const Document one = segment_document("Only one sentence here.");
  EXPECT_EQ(lead_baseline(one, 3).tokens, one.sentences[0]);
  const Document doc = segment_document("First one. Second one. Third one. Fourth one.");
  const SummaryCandidate s = lead_baseline(doc, 2);
  EXPECT_EQ(s.text, "first one . second one .");
  EXPECT_EQ(s.pointers.indices, (std::vector<int>{0, 1}));
  EXPECT_THROW(lead_baseline(doc, 0), std::invalid_argument);
  EXPECT_THROW(lead_baseline(Document{}, 1), std::invalid_argument);
}

TEST(LeadWord, PrefixOfDocument) {
  for (const auto& doc : fixtures::synthetic_corpus(20, 5)) {
    const Tokens flat = doc.flat_tokens();
    for (int lc : {1, 7, 26, 500}) {
      const SummaryCandidate s = lead_word_baseline(doc, lc);
      EXPECT_EQ(s.tokens.size(), std::min<std::size_t>(flat.size(), static_cast<std::size_t>(lc)));
      EXPECT_TRUE(std::equal(s.tokens.begin(), s.tokens.end(), flat.begin()));
      EXPECT_LE(lead_baseline(doc, 2).pointers.indices.size(), 2u);
    }
  }
}

TEST(CompressiveSubset, DetectsViolations) {
  const Document doc = segment_document("A b c. D e f. G h i.");
  const SummaryCandidate ext = lead_baseline(doc, 2);
  SummaryCandidate comp;
  comp.tokens = {"a", "e"};
  comp.positions = {{0, 0}, {1, 1}};
  EXPECT_TRUE(is_compressive_subset(ext, comp, doc, 2));
  EXPECT_FALSE(is_compressive_subset(ext, comp, doc, 1));
  comp.positions = {{1, 1}, {0, 0}};
  comp.tokens = {"e", "a"};
  EXPECT_FALSE(is_compressive_subset(ext, comp, doc, 5));
  comp.tokens = {"g"};
  comp.positions = {{2, 0}};
  EXPECT_FALSE(is_compressive_subset(ext, comp, doc, 5));
  comp.tokens = {"z"};
  comp.positions = {{0, 0}};
  EXPECT_FALSE(is_compressive_subset(ext, comp, doc, 5));
}

TEST(SampleIndices, SortedDistinctDeterministic) {
  const auto a = sample_indices(100, 10, 4);
  EXPECT_EQ(a, sample_indices(100, 10, 4));
  EXPECT_EQ(a.size(), 10u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(std::adjacent_find(a.begin(), a.end()), a.end());
  EXPECT_EQ(sample_indices(5, 10, 1), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(Evaluate, LeadOnReferencePrefixScoresPerfectly) {
  const std::vector<Document> docs{with_reference("A b c. D e f. G h i. J k l.", "A b c. D e f. G h i.")};
  const std::vector<SummarySystem> systems{lead_system({3, 58})};
  const EvalReport r = evaluate(docs, systems, 1000, 1, "tiny", {3, 58});
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].system, "LEAD");
  EXPECT_DOUBLE_EQ(r.rows[0].scores.rouge1_f, 100.0);
  EXPECT_DOUBLE_EQ(r.rows[0].scores.rouge2_f, 100.0);
  EXPECT_DOUBLE_EQ(r.rows[0].scores.rougeL_f, 100.0);
  EXPECT_EQ(r.sample_size, 1u);
}

TEST(Evaluate, SameSeedSameReport) {
  const auto docs = fixtures::synthetic_corpus(40, 6, true);
  const std::vector<SummarySystem> systems{lead_system({2, 20}), lead_word_system({2, 20})};
  const EvalReport a = evaluate(docs, systems, 15, 3, "syn", {2, 20});
  const EvalReport b = evaluate(docs, systems, 15, 3, "syn", {2, 20});
  EXPECT_EQ(report_json(a), report_json(b));
  EXPECT_EQ(format_report(a), format_report(b));
  EXPECT_EQ(a.sample_size, 15u);
  const EvalReport c = evaluate(docs, systems, 15, 4, "syn", {2, 20});
  EXPECT_NE(a.config_hash, c.config_hash);
  const std::string table = format_report(a);
  EXPECT_NE(table.find("LEAD-WORD"), std::string::npos);
}

TEST(Evaluate, MissingReferenceIsAnError) {
  auto docs = fixtures::synthetic_corpus(3, 7, true);
  docs[1].source_summary.reset();
  const std::vector<SummarySystem> systems{lead_system({3, 58})};
  EXPECT_THROW(evaluate(docs, systems, 10, 1, "x", {3, 58}), std::invalid_argument);
  EXPECT_THROW(evaluate(docs, systems, 0, 1, "x", {3, 58}), std::invalid_argument);
}

TEST(Evaluate, ReadsReferencesFromFile) {
  fixtures::TempDir dir;
  const auto path = dir.path() / "test.jsonl";
  fixtures::write_jsonl(path, fixtures::synthetic_corpus(12, 8, true));
  const std::vector<SummarySystem> systems{lead_system({3, 58})};
  const EvalReport r = evaluate(path.string(), systems, 5, 2, {3, 58});
  EXPECT_EQ(r.sample_size, 5u);
  EXPECT_GT(r.rows[0].scores.rouge1_f, 0.0);
  const auto j = report_json(r);
  EXPECT_EQ(j["rows"].size(), 1u);
}
