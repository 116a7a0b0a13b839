// Acceptance checks. "core" runs criteria 1-6 and 9-11 on synthetic data;
// "datasets" runs the baseline reproductions 7 and 8 against real test sets
// named by URLCOMSUM_CNNDM_TEST, URLCOMSUM_NEWSROOM_TEST and URLCOMSUM_XSUM_TEST.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/simplex.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"
#include "urlcomsum/eval.hpp"
#include "urlcomsum/training.hpp"

using namespace urlcomsum;

namespace {

enum class Status { pass, fail, blocked };

struct Outcome {
  Status status = Status::fail;
  std::string detail;
};

Outcome check(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Eigen::VectorXd random_simplex(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(rng, 0.05, 1.0);
  return v / v.sum();
}

Outcome ot_correctness() {
  Timer t;
  Rng rng(101);
  double worst_gap = 0.0, worst_marginal = 0.0, worst_exact = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = static_cast<Eigen::Index>(1 + uniform_index(rng, 6));
    const auto n = static_cast<Eigen::Index>(1 + uniform_index(rng, 6));
    const Eigen::VectorXd p = random_simplex(rng, m), q = random_simplex(rng, n);
    Eigen::MatrixXd cost(m, n);
    for (Eigen::Index i = 0; i < cost.size(); ++i) cost.data()[i] = uniform(rng, 0.0, 2.0);
    const double lp = oracle::transport_lp(p, q, cost).value;
    const OtResult sk = sinkhorn(p, q, cost);
    const OtResult ex = exact_transport(p, q, cost);
    worst_gap = std::max(worst_gap, std::abs(sk.distance - lp));
    worst_exact = std::max(worst_exact, std::abs(ex.distance - lp));
    worst_marginal = std::max({worst_marginal, (ex.plan.rowwise().sum() - p).cwiseAbs().maxCoeff(),
                               (ex.plan.colwise().sum().transpose() - q).cwiseAbs().maxCoeff()});
  }
  const double secs = t.seconds();
  return check(worst_gap <= 0.01 && worst_marginal <= 1e-9 && secs < 10.0,
               "max |sinkhorn - LP| " + fmt(worst_gap) + ", max |exact - LP| " + fmt(worst_exact) +
                   ", exact marginal error " + fmt(worst_marginal) + ", " + fmt(secs, 3) + " s");
}

Outcome coverage_identity() {
  const auto docs = fixtures::synthetic_corpus(20, 202);
  const Vocab vocab = build_vocab(docs);
  const EmbeddingTable emb = random_embeddings(vocab, 300);
  const StopwordSet& sw = builtin_stopwords();
  const CoverageContext ctx{&vocab, &emb, &sw, {}};
  double lowest = 1.0;
  for (const auto& d : docs) {
    const Tokens t = d.flat_tokens();
    lowest = std::min(lowest, coverage_reward(t, t, ctx).reward);
  }
  return check(lowest >= 0.999, "min coverage(D, D) over 20 documents " + fmt(lowest, 8));
}

Outcome slor_null_case() {
  const auto docs = fixtures::synthetic_corpus(50, 303);
  const auto lm = LanguageModelHandle::unigram_only(docs);
  const Vocab vocab = build_vocab(docs);
  Rng rng(3);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    Tokens seq(1 + uniform_index(rng, 30));
    for (auto& tok : seq)
      tok = uniform01(rng) < 0.1 ? "never-seen-" + std::to_string(i) : vocab.token(static_cast<int>(2 + uniform_index(rng, vocab.size() - 2)));
    worst = std::max(worst, std::abs(slor(seq, lm)));
  }
  return check(worst <= 1e-9, "max |SLOR| with the unigram model " + fmt(worst));
}

Outcome gradient_fidelity() {
  Timer t;
  TrainConfig cfg;
  cfg.model.d_emb = 10;
  cfg.model.hidden = 8;
  cfg.model.max_sentences = 4;
  cfg.model.max_words = 6;
  cfg.budgets = {2, 5};
  const TrainingData data = prepare_training_data(fixtures::synthetic_corpus(3, 7), cfg);
  Summarizer model(cfg.model, 3);
  const TrainExample& ex = data.examples[0];

  ForcedChoices choices;
  {
    ad::Tape tape(false);
    const Binder bind(tape, model.params());
    Rng rng(5);
    const AgentTrace tr = run_agents(bind, model, *ex.doc, ex.idoc, data.vocab, data.embeddings, cfg.budgets,
                                     DecodeMode::sampled, &rng);
    choices = {tr.extractive.pointers.indices, tr.compressive.pointers.indices};
  }
  model.params().zero_grad();
  {
    ad::Tape tape(true);
    const Binder bind(tape, model.params(), &model.params());
    const AgentTrace tr = run_agents(bind, model, *ex.doc, ex.idoc, data.vocab, data.embeddings, cfg.budgets,
                                     DecodeMode::greedy, nullptr, &choices);
    tape.backward(ad::add(tr.extractor_log_prob, tr.compressor_log_prob));
  }

  const double h = 1e-4;
  int total = 0, ok = 0;
  Rng pick(11);
  for (auto& [name, p] : model.params().all()) {
    for (int s = 0; s < 6; ++s) {
      const auto i = static_cast<Eigen::Index>(uniform_index(pick, static_cast<std::size_t>(p.value.size())));
      const double orig = p.value.data()[i];
      p.value.data()[i] = orig + h;
      const double fp = sequence_log_prob(ex, model, data, cfg.budgets, choices);
      p.value.data()[i] = orig - h;
      const double fm = sequence_log_prob(ex, model, data, cfg.budgets, choices);
      p.value.data()[i] = orig;
      const double numeric = (fp - fm) / (2 * h), analytic = p.grad.data()[i];
      const double den = std::max(std::abs(numeric), std::abs(analytic));
      const double rel = den < 1e-8 ? 0.0 : std::abs(numeric - analytic) / den;
      ++total;
      if (rel <= 1e-3) ++ok;
    }
  }
  const double frac = static_cast<double>(ok) / total;
  const double secs = t.seconds();
  return check(frac >= 0.95 && secs < 60.0, std::to_string(ok) + "/" + std::to_string(total) +
                                                 " coordinates within 1e-3 relative error, " + fmt(secs, 3) + " s");
}

Outcome scst_sign() {
  TrainConfig cfg;
  cfg.model.d_emb = 10;
  cfg.model.hidden = 8;
  cfg.model.layers = 1;
  cfg.model.max_sentences = 6;
  cfg.model.max_words = 12;
  cfg.budgets = {2, 8};
  const TrainingData data = prepare_training_data(fixtures::synthetic_corpus(40, 505), cfg);
  const RewardContext ctx = data.reward_context(cfg);
  const RewardFn reward = [&](const TrainExample& ex, const SummaryCandidate& s) {
    return total_reward(ex.doc_tokens, s.tokens, ctx);
  };

  int cases = 0, raised = 0;
  double smallest_gain = INFINITY;
  for (std::size_t attempt = 0; attempt < 400 && cases < 10; ++attempt) {
    cfg.seed = 100 + attempt;
    const TrainState fresh = initial_state(cfg);
    const std::vector<const TrainExample*> batch{&data.examples[attempt % data.examples.size()]};
    TrainState probe = fresh;
    StepOptions dry;
    dry.apply_update = false;
    const StepMetrics pm = scst_step(batch, probe, data, cfg.budgets, reward, dry);
    if (!(pm.advantages[0] > 0.0)) continue;
    TrainState state = fresh;
    const double before = sequence_log_prob(*batch[0], state.model, data, cfg.budgets, pm.sampled_choices[0]);
    const StepMetrics m = scst_step(batch, state, data, cfg.budgets, reward);
    const double after = sequence_log_prob(*batch[0], state.model, data, cfg.budgets, m.sampled_choices[0]);
    ++cases;
    if (after > before) ++raised;
    smallest_gain = std::min(smallest_gain, after - before);
  }

  cfg.seed = 1;
  TrainState state = initial_state(cfg);
  const auto before = state.model.params().all();
  std::vector<const TrainExample*> batch;
  for (std::size_t i = 0; i < 3; ++i) batch.push_back(&data.examples[i]);
  scst_step(batch, state, data, cfg.budgets, [](const TrainExample&, const SummaryCandidate&) {
    RewardBreakdown r;
    r.total = 0.42;
    return r;
  });
  double drift = 0.0;
  for (const auto& [name, p] : state.model.params().all())
    drift = std::max(drift, (p.value - before.at(name).value).cwiseAbs().maxCoeff());

  return check(cases >= 5 && raised == cases && drift <= 1e-12,
               std::to_string(raised) + "/" + std::to_string(cases) +
                   " frozen batches with R(sampled) > R(greedy) raised the sampled log-prob (min gain " +
                   fmt(smallest_gain) + "), equal-reward parameter drift " + fmt(drift));
}

Outcome pointer_contracts() {
  ModelConfig mc;
  mc.d_emb = 10;
  mc.hidden = 8;
  mc.layers = 1;
  const Summarizer model(mc, 6);
  Rng rng(606);
  int violations = 0;
  double worst_sum = 0.0;
  for (int call = 0; call < 10000; ++call) {
    const auto n = static_cast<Eigen::Index>(1 + uniform_index(rng, 12));
    Eigen::MatrixXd reps(n, mc.rep_dim());
    for (Eigen::Index i = 0; i < reps.size(); ++i) reps.data()[i] = uniform(rng, -1.0, 1.0);
    std::vector<bool> mask(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = uniform01(rng) < 0.75;
    mask[uniform_index(rng, mask.size())] = true;
    const int budget = 1 + static_cast<int>(uniform_index(rng, 6));
    const int real = static_cast<int>(std::count(mask.begin(), mask.end(), true));
    const auto mode = call % 2 == 0 ? DecodeMode::sampled : DecodeMode::greedy;
    const PointerNetwork& ptr = call % 3 == 0 ? model.extractor_pointer() : model.compressor_pointer();
    const PointerSequence seq =
        decode_pointers(reps, mask, budget, mode, ptr, model.params(), static_cast<std::uint64_t>(call), true);
    bool bad = static_cast<int>(seq.indices.size()) != std::min(budget, real);
    std::set<int> seen;
    for (std::size_t k = 0; k < seq.indices.size(); ++k) {
      const int idx = seq.indices[k];
      bad = bad || idx < 0 || idx >= n || !mask[static_cast<std::size_t>(idx)] || !seen.insert(idx).second;
      const double s = seq.step_distributions[k].sum();
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
      bad = bad || std::abs(s - 1.0) > 1e-6;
      bad = bad || std::abs(seq.step_log_probs[k] - std::log(seq.step_distributions[k](idx))) > 1e-9;
    }
    if (bad) ++violations;
  }
  return check(violations == 0, std::to_string(violations) + " violations in 10000 decode calls, max |sum - 1| " +
                                    fmt(worst_sum));
}

// A pretrained-scale vector per vocabulary word, standing in for a GloVe file.
void write_vectors(const std::filesystem::path& path, const std::vector<Document>& docs, int dim,
                   std::uint64_t seed) {
  const Vocab vocab = build_vocab(docs);
  Rng rng(seed);
  std::ofstream out(path);
  out.precision(17);
  for (std::size_t id = 2; id < vocab.size(); ++id) {
    out << vocab.token(static_cast<int>(id));
    for (int j = 0; j < dim; ++j) out << ' ' << uniform(rng, -0.5, 0.5);
    out << '\n';
  }
}

struct TrendRun {
  std::uint64_t seed = 0;
  double before = 0.0, after = 0.0, seconds = 0.0;
  std::filesystem::path checkpoint;
};

TrendRun trend_run(const fixtures::TempDir& dir, std::uint64_t seed) {
  Timer t;
  TrainConfig cfg;
  cfg.model.d_emb = 32;
  cfg.model.hidden = 16;
  cfg.model.layers = 1;
  cfg.model.heads = 4;
  cfg.epochs = 30;
  cfg.seed = seed;
  cfg.data_path = (dir.path() / "train.jsonl").string();
  cfg.embeddings_path = (dir.path() / "vectors.txt").string();
  cfg.out_dir = (dir.path() / ("seed" + std::to_string(seed))).string();
  TrendRun run;
  run.seed = seed;
  {
    const TrainingData data = load_training_data(cfg);
    run.before = mean_greedy_reward(initial_state(cfg).model, data, cfg);
  }
  const TrainResult result = train(cfg);
  const ModelBundle bundle = load_model_bundle(result.checkpoint);
  const TrainingData data = load_training_data(cfg);
  run.after = mean_greedy_reward(bundle.model, data, cfg);
  run.checkpoint = result.checkpoint;
  run.seconds = t.seconds();
  return run;
}

Outcome compressive_property(const std::filesystem::path& checkpoint) {
  const auto bundle = std::make_shared<const ModelBundle>(load_model_bundle(checkpoint));
  const auto docs = fixtures::synthetic_corpus(300, 909, true);
  const Budgets budgets{3, 58};
  const std::vector<SummarySystem> systems{model_system(bundle, budgets, DecodeMode::greedy, 1),
                                           model_system(bundle, {2, 12}, DecodeMode::sampled, 2, "Tight")};
  const EvalReport r1 = evaluate(docs, std::span(systems).first(1), docs.size(), 1, "synthetic", budgets);
  const EvalReport r2 = evaluate(docs, std::span(systems).last(1), docs.size(), 1, "synthetic", {2, 12});
  const std::size_t checked = r1.compressive_checked + r2.compressive_checked;
  const std::size_t violations = r1.compressive_violations + r2.compressive_violations;
  return check(violations == 0 && checked == 2 * docs.size(),
               std::to_string(violations) + " violations over " + std::to_string(checked) +
                   " compressive summaries (L_C 58 greedy and L_C 12 sampled)");
}

Outcome plan_export() {
  fixtures::TempDir dir;
  const auto docs = fixtures::synthetic_corpus(20, 1111);
  const Vocab vocab = build_vocab(docs);
  const EmbeddingTable emb = random_embeddings(vocab, 50);
  const StopwordSet& sw = builtin_stopwords();
  bool bit_exact = true;
  double worst_exact = 0.0, worst_sinkhorn = 0.0;
  int k = 0;
  for (OtSolver solver : {OtSolver::exact, OtSolver::sinkhorn}) {
    const CoverageContext ctx{&vocab, &emb, &sw, {solver, {}}};
    for (const auto& d : docs) {
      const Tokens doc = d.flat_tokens();
      const Tokens sum = d.sentences[d.sentences.size() / 2];
      const TransportPlan plan = coverage_plan(doc, sum, ctx);
      const auto stem = dir.path() / ("plan" + std::to_string(k++));
      const TransportPlan back = read_plan_matrix(export_transport_plan(plan, stem, false).at(0));
      bit_exact = bit_exact && back.doc_tokens == plan.doc_tokens && back.sum_tokens == plan.sum_tokens &&
                  back.plan.rows() == plan.plan.rows() && back.plan.cols() == plan.plan.cols() &&
                  std::memcmp(back.plan.data(), plan.plan.data(),
                              sizeof(double) * static_cast<std::size_t>(plan.plan.size())) == 0;
      const TFDistribution p = tf_distribution(vocab.ids(doc), sw, vocab);
      const TFDistribution q = tf_distribution(vocab.ids(sum), sw, vocab);
      const double err = std::max((back.plan.rowwise().sum() - p.weights).cwiseAbs().maxCoeff(),
                                  (back.plan.colwise().sum().transpose() - q.weights).cwiseAbs().maxCoeff());
      (solver == OtSolver::exact ? worst_exact : worst_sinkhorn) =
          std::max(solver == OtSolver::exact ? worst_exact : worst_sinkhorn, err);
    }
  }
  return check(bit_exact && worst_exact <= 1e-9 && worst_sinkhorn <= 1e-6,
               std::string(bit_exact ? "40 plans round-trip bit-exactly" : "round trip mismatch") +
                   ", marginal error exact " + fmt(worst_exact) + " sinkhorn " + fmt(worst_sinkhorn));
}

struct Target {
  const char* name;
  const char* env;
  const char* profile;
  RougeScores lead, lead_word;
};

const std::vector<Target>& targets() {
  static const std::vector<Target> t = {
      {"CNN/DM", "URLCOMSUM_CNNDM_TEST", "cnndm", {40.0, 17.5, 32.9}, {39.7, 16.6, 32.5}},
      {"Newsroom", "URLCOMSUM_NEWSROOM_TEST", "newsroom", {33.9, 23.2, 30.7}, {34.9, 23.1, 30.7}},
      {"XSum", "URLCOMSUM_XSUM_TEST", "xsum", {19.4, 2.4, 12.9}, {18.3, 1.9, 12.8}},
  };
  return t;
}

bool within(const RougeScores& got, const RougeScores& want, double tol) {
  return std::abs(got.rouge1_f - want.rouge1_f) <= tol && std::abs(got.rouge2_f - want.rouge2_f) <= tol &&
         std::abs(got.rougeL_f - want.rougeL_f) <= tol;
}

std::string triple(const RougeScores& s) { return fmt(s.rouge1_f, 3) + "/" + fmt(s.rouge2_f, 3) + "/" + fmt(s.rougeL_f, 3); }

// Criterion 7 checks the LEAD row, criterion 8 the LEAD-WORD row.
std::pair<Outcome, Outcome> baseline_reproduction() {
  std::string d7, d8, missing;
  bool ok7 = true, ok8 = true, any = false;
  for (const auto& t : targets()) {
    const char* path = std::getenv(t.env);
    if (path == nullptr || *path == '\0' || !std::filesystem::exists(path)) {
      missing += std::string(missing.empty() ? "" : ", ") + t.env;
      continue;
    }
    any = true;
    const Budgets budgets = *profile_budgets(t.profile);
    const std::vector<SummarySystem> systems{lead_system(budgets), lead_word_system(budgets)};
    const EvalReport r = evaluate(path, systems, 1000, 1, budgets);
    const RougeScores lead = r.rows.at(0).scores, word = r.rows.at(1).scores;
    ok7 = ok7 && within(lead, t.lead, 2.0);
    ok8 = ok8 && within(word, t.lead_word, 2.0);
    d7 += std::string(d7.empty() ? "" : "; ") + t.name + " " + triple(lead) + " vs " + triple(t.lead);
    d8 += std::string(d8.empty() ? "" : "; ") + t.name + " " + triple(word) + " vs " + triple(t.lead_word);
  }
  auto outcome = [&](bool ok, const std::string& detail) {
    if (!ok) return Outcome{Status::fail, detail};
    if (!missing.empty())
      return Outcome{Status::blocked, (any ? detail + "; " : std::string()) + "test sets not supplied: " + missing};
    return Outcome{Status::pass, detail};
  };
  return {outcome(ok7, d7), outcome(ok8, d8)};
}

const char* label(Status s) {
  switch (s) {
    case Status::pass: return "PASS";
    case Status::fail: return "FAIL";
    case Status::blocked: return "BLOCKED";
  }
  return "?";
}

std::set<int> selected;  // empty: every criterion

int report(int id, const std::string& name, const std::function<Outcome()>& run, std::vector<Status>& statuses) {
  if (!selected.empty() && !selected.contains(id)) return 0;
  Outcome o;
  try {
    o = run();
  } catch (const std::exception& e) {
    o = {Status::fail, std::string("exception: ") + e.what()};
  }
  std::printf("criterion %2d %-26s %-7s %s\n", id, name.c_str(), label(o.status), o.detail.c_str());
  std::fflush(stdout);
  statuses.push_back(o.status);
  return 0;
}

int run_core() {
  std::vector<Status> st;
  report(1, "OT correctness", ot_correctness, st);
  report(2, "coverage identity", coverage_identity, st);
  report(3, "SLOR null case", slor_null_case, st);
  report(4, "gradient fidelity", gradient_fidelity, st);
  report(5, "SCST sign property", scst_sign, st);
  report(6, "pointer contracts", pointer_contracts, st);

  fixtures::TempDir dir;
  const auto corpus = fixtures::synthetic_corpus(200, 1001);
  fixtures::write_jsonl(dir.path() / "train.jsonl", corpus);
  write_vectors(dir.path() / "vectors.txt", corpus, 32, 4242);
  std::vector<TrendRun> runs;
  report(9, "training trend",
         [&] {
           int passed = 0;
           std::string detail;
           for (std::uint64_t seed : {1, 2, 3}) {
             runs.push_back(trend_run(dir, seed));
             const TrendRun& r = runs.back();
             const bool ok = r.after - r.before >= 0.01;
             passed += ok;
             detail += "seed " + std::to_string(seed) + " " + fmt(r.before) + " -> " + fmt(r.after) + " (" +
                       fmt(r.seconds, 3) + " s)" + (ok ? "" : " no gain") + "; ";
           }
           return check(passed >= 2, detail + std::to_string(passed) + "/3 seeds gained >= 0.01");
         },
         st);
  report(10, "compressive property",
         [&] {
           if (runs.empty()) return Outcome{Status::fail, "no trained checkpoint"};
           return compressive_property(runs.front().checkpoint);
         },
         st);
  report(11, "transport-plan export", plan_export, st);
  return std::count(st.begin(), st.end(), Status::pass) == static_cast<long>(st.size()) ? 0 : 1;
}

int run_datasets() {
  std::vector<Status> st;
  std::pair<Outcome, Outcome> outcomes;
  report(7, "LEAD reproduction",
         [&] {
           outcomes = baseline_reproduction();
           return outcomes.first;
         },
         st);
  report(8, "LEAD-WORD reproduction", [&] { return outcomes.second; }, st);
  if (std::count(st.begin(), st.end(), Status::fail) > 0) return 1;
  if (std::count(st.begin(), st.end(), Status::blocked) > 0) return 77;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string which = argc > 1 ? argv[1] : "core";
  for (int i = 2; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  if (which == "core") return run_core();
  if (which == "datasets") return run_datasets();
  std::cerr << "usage: acceptance core|datasets\n";
  return 2;
}
