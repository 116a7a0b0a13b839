#include "urlcomsum/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include "urlcomsum/checkpoint.hpp"
#include "urlcomsum/config.hpp"
#include "urlcomsum/eval.hpp"
#include "urlcomsum/rewards.hpp"
#include "urlcomsum/training.hpp"

namespace urlcomsum {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BudgetFlags {
  std::string profile = "cnndm";
  std::optional<int> sentences;
  std::optional<int> words;

  void add(CLI::App& app) {
    app.add_option("--profile", profile, "Dataset budget profile: cnndm, newsroom or xsum");
    app.add_option("--L_E", sentences, "Sentences to extract (overrides the profile)");
    app.add_option("--L_C", words, "Words to keep (overrides the profile)");
  }

  Budgets resolve() const {
    auto b = profile_budgets(profile);
    if (!b) throw UsageError("--profile must be one of cnndm, newsroom, xsum (got '" + profile + "')");
    if (sentences) b->sentences = *sentences;
    if (words) b->words = *words;
    if (b->sentences < 1) throw UsageError("--L_E must be >= 1");
    if (b->words < 1) throw UsageError("--L_C must be >= 1");
    return *b;
  }
};

struct TrainFlags {
  std::string config, data, out, embeddings, resume, schedule;
  std::optional<std::string> profile;
  std::optional<std::uint64_t> seed;
  std::optional<int> sentences, words, batch_size, epochs, checkpoint_every;
  std::optional<long> max_steps;
  std::optional<double> w_cov, w_flu, lr;
};

struct TextFlags {
  std::string document, document_file, summary, summary_file, data, checkpoint, embeddings, solver = "sinkhorn";
  std::optional<double> w_cov, w_flu;
  int dim = 300;
  std::uint64_t seed = kDefaultEmbeddingSeed;

  void add(CLI::App& app) {
    app.add_option("--document", document, "Document text");
    app.add_option("--document-file", document_file, "File holding the document text");
    app.add_option("--summary", summary, "Summary text");
    app.add_option("--summary-file", summary_file, "File holding the summary text");
    app.add_option("--data", data, "JSON-lines corpus for the fluency language model");
    app.add_option("--checkpoint", checkpoint, "Take vocabulary and embeddings from a checkpoint");
    app.add_option("--embeddings", embeddings, "Word vectors, one 'token v1 ... vd' per line");
    app.add_option("--dim", dim, "Embedding width when no checkpoint is given");
    app.add_option("--seed", seed, "Seed for embeddings of tokens without a vector");
    app.add_option("--w-cov", w_cov, "Coverage weight");
    app.add_option("--w-flu", w_flu, "Fluency weight");
    app.add_option("--solver", solver, "Transport solver: sinkhorn or exact");
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Document and summary text, vocabulary, embeddings, language model, and the
// reward context built over them.
struct ScoringSetup {
  Document doc;
  Tokens summary;
  Vocab vocab;
  EmbeddingTable emb;
  StopwordSet stopwords;
  LanguageModelHandle lm;
  RewardContext ctx;
};

std::unique_ptr<ScoringSetup> scoring_setup(const TextFlags& f) {
  if (f.document.empty() && f.document_file.empty()) throw UsageError("--document or --document-file is required");
  if (f.summary.empty() && f.summary_file.empty()) throw UsageError("--summary or --summary-file is required");
  auto s = std::make_unique<ScoringSetup>();
  s->doc = segment_document(f.document_file.empty() ? f.document : read_file(f.document_file));
  s->summary = tokenize(f.summary_file.empty() ? f.summary : read_file(f.summary_file));
  if (s->doc.empty()) throw UsageError("the document is empty");
  if (s->summary.empty()) throw UsageError("the summary is empty");

  std::vector<Document> corpus;
  if (!f.data.empty()) corpus = read_jsonl(f.data, /*keep_summaries=*/false);
  if (corpus.empty()) corpus.push_back(s->doc);

  if (!f.checkpoint.empty()) {
    Checkpoint ck = load_checkpoint(f.checkpoint);
    s->vocab = std::move(ck.vocab);
    s->emb = std::move(ck.embeddings);
  } else {
    std::vector<Document> vocab_docs = corpus;
    vocab_docs.push_back(s->doc);
    Document sum_doc;
    sum_doc.sentences.push_back(s->summary);
    vocab_docs.push_back(sum_doc);
    s->vocab = build_vocab(vocab_docs);
    if (f.dim < 1) throw UsageError("--dim must be >= 1");
    s->emb = f.embeddings.empty() ? random_embeddings(s->vocab, f.dim, f.seed)
                                  : load_embeddings(f.embeddings, s->vocab, f.dim, f.seed);
  }
  s->stopwords = resolve_stopwords();
  s->lm = LanguageModelHandle::train(corpus);

  s->ctx.coverage.vocab = &s->vocab;
  s->ctx.coverage.emb = &s->emb;
  s->ctx.coverage.stopwords = &s->stopwords;
  try {
    s->ctx.coverage.ot.solver = parse_ot_solver(f.solver);
  } catch (const std::invalid_argument&) {
    throw UsageError("--solver must be sinkhorn or exact");
  }
  s->ctx.lm = &s->lm;
  if (f.w_cov) s->ctx.weights.coverage = *f.w_cov;
  if (f.w_flu) s->ctx.weights.fluency = *f.w_flu;
  if (s->ctx.weights.coverage < 0 || s->ctx.weights.fluency < 0)
    throw UsageError("--w-cov and --w-flu must be non-negative");
  return s;
}

int cmd_train(const TrainFlags& f, std::ostream& out) {
  TrainConfig cfg;
  try {
    if (!f.config.empty()) cfg.apply(read_key_values(f.config));
    KeyValues kv;
    if (f.profile) kv["profile"] = *f.profile;
    cfg.apply(kv);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!f.data.empty()) cfg.data_path = f.data;
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (!f.embeddings.empty()) cfg.embeddings_path = f.embeddings;
  if (f.seed) cfg.seed = *f.seed;
  if (f.sentences) cfg.budgets.sentences = *f.sentences;
  if (f.words) cfg.budgets.words = *f.words;
  if (f.w_cov) cfg.weights.coverage = *f.w_cov;
  if (f.w_flu) cfg.weights.fluency = *f.w_flu;
  if (f.lr) cfg.learning_rate = *f.lr;
  if (f.batch_size) cfg.batch_size = *f.batch_size;
  if (f.epochs) cfg.epochs = *f.epochs;
  if (f.checkpoint_every) cfg.checkpoint_every = *f.checkpoint_every;
  if (f.max_steps) cfg.max_steps = *f.max_steps;
  if (!f.schedule.empty()) {
    if (f.schedule == "joint") cfg.schedule = Schedule::joint;
    else if (f.schedule == "staged") cfg.schedule = Schedule::staged;
    else throw UsageError("--schedule must be joint or staged");
  }
  if (cfg.data_path.empty()) throw UsageError("--data is required (or set 'data' in --config)");
  if (cfg.out_dir.empty()) throw UsageError("--out is required (or set 'out' in --config)");
  if (!std::filesystem::exists(cfg.data_path)) throw UsageError("--data: file not found: " + cfg.data_path);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  out << nlohmann::json{{"config", cfg.to_json()}}.dump() << '\n';
  std::optional<std::filesystem::path> resume;
  if (!f.resume.empty()) resume = f.resume;
  const TrainResult r = train(cfg, resume);
  out << nlohmann::json{{"checkpoint", r.checkpoint.string()},
                        {"metrics", r.metrics.string()},
                        {"steps", r.steps}}
             .dump()
      << '\n';
  return 0;
}

int cmd_summarize(const std::string& checkpoint, const std::string& data, const std::string& document,
                  const std::string& out_path, const std::string& mode_name, std::uint64_t seed,
                  const BudgetFlags& budget_flags, std::ostream& out) {
  if (checkpoint.empty()) throw UsageError("--checkpoint is required");
  if (data.empty() && document.empty()) throw UsageError("--data or --document is required");
  DecodeMode mode;
  try {
    mode = parse_decode_mode(mode_name);
  } catch (const std::invalid_argument&) {
    throw UsageError("--mode must be greedy or sampled");
  }
  const Budgets budgets = budget_flags.resolve();
  const ModelBundle bundle = load_model_bundle(checkpoint);

  std::vector<Document> docs;
  if (!data.empty()) {
    docs = read_jsonl(data, /*keep_summaries=*/false);
  } else {
    docs.push_back(segment_document(document));
    docs.back().id = "0";
  }
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw std::runtime_error("cannot write " + out_path);
  }
  std::ostream& sink = out_path.empty() ? out : file;
  for (const auto& d : docs) {
    nlohmann::json line = {{"id", d.id}};
    if (d.empty()) {
      line["extractive"] = "";
      line["compressive"] = "";
      line["error"] = "empty document";
    } else {
      const SummaryPair p = summarize(d, bundle.vocab, bundle.embeddings, bundle.model, budgets, mode, seed);
      line["extractive"] = p.extractive.text;
      line["compressive"] = p.compressive.text;
      line["extracted_sentences"] = p.extractive.pointers.indices;
    }
    sink << line.dump() << '\n';
  }
  return 0;
}

int cmd_score(const TextFlags& f, std::ostream& out) {
  const auto s = scoring_setup(f);
  const RewardBreakdown r = total_reward(s->doc.flat_tokens(), s->summary, s->ctx);
  out << nlohmann::json{{"coverage", r.coverage},
                        {"fluency", r.fluency},
                        {"total", r.total},
                        {"w_cov", r.weights.coverage},
                        {"w_flu", r.weights.fluency},
                        {"degenerate", r.degenerate}}
             .dump()
      << '\n';
  return 0;
}

int cmd_explain(const TextFlags& f, const std::string& out_dir, bool heatmap, std::ostream& out) {
  if (out_dir.empty()) throw UsageError("--out is required");
  const auto s = scoring_setup(f);
  const TransportPlan plan = coverage_plan(s->doc.flat_tokens(), s->summary, s->ctx.coverage);
  std::filesystem::create_directories(out_dir);
  const auto files = export_transport_plan(plan, std::filesystem::path(out_dir) / "plan", heatmap);
  std::vector<std::string> names;
  for (const auto& p : files) names.push_back(p.string());
  out << nlohmann::json{{"coverage", 1.0 - plan.distance},
                        {"distance", plan.distance},
                        {"solver", to_string(plan.solver)},
                        {"converged", plan.converged},
                        {"files", names}}
             .dump()
      << '\n';
  return 0;
}

int cmd_evaluate(const std::string& data, const std::string& systems_arg, std::size_t sample_size,
                 std::uint64_t seed, const std::string& out_dir, const std::string& mode_name,
                 const std::string& format, const BudgetFlags& budget_flags, std::ostream& out) {
  if (data.empty()) throw UsageError("--data is required");
  if (sample_size == 0) throw UsageError("--sample-size must be > 0");
  if (format != "table" && format != "json") throw UsageError("--format must be table or json");
  DecodeMode mode;
  try {
    mode = parse_decode_mode(mode_name);
  } catch (const std::invalid_argument&) {
    throw UsageError("--mode must be greedy or sampled");
  }
  const Budgets budgets = budget_flags.resolve();
  std::vector<SummarySystem> systems;
  std::stringstream ss(systems_arg);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "lead") {
      systems.push_back(lead_system(budgets));
    } else if (item == "leadword") {
      systems.push_back(lead_word_system(budgets));
    } else if (item.starts_with("model:") && item.size() > 6) {
      auto bundle = std::make_shared<const ModelBundle>(load_model_bundle(item.substr(6)));
      systems.push_back(model_system(bundle, budgets, mode, seed));
    } else {
      throw UsageError("--systems: unknown system '" + item + "' (use lead, leadword, model:<checkpoint>)");
    }
  }
  if (systems.empty()) throw UsageError("--systems is empty");
  const EvalReport report = evaluate(data, systems, sample_size, seed, budgets);
  const std::string table = format_report(report);
  const nlohmann::json json = report_json(report);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream(std::filesystem::path(out_dir) / "report.txt") << table;
    std::ofstream(std::filesystem::path(out_dir) / "report.json") << json.dump(2) << '\n';
  }
  if (format == "json") out << json.dump() << '\n';
  else out << table;
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised extract-then-compress summarization"};
  app.require_subcommand(1);

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Train both agents with self-critical RL");
  train_cmd->add_option("--config", tf.config, "key = value configuration file");
  train_cmd->add_option("--data", tf.data, "Training documents (JSON lines)");
  train_cmd->add_option("--out", tf.out, "Output directory");
  train_cmd->add_option("--embeddings", tf.embeddings, "Word vectors file");
  train_cmd->add_option("--resume", tf.resume, "Checkpoint to continue from");
  train_cmd->add_option("--schedule", tf.schedule, "joint or staged");
  train_cmd->add_option("--profile", tf.profile, "cnndm, newsroom or xsum");
  train_cmd->add_option("--seed", tf.seed, "Seed for initialization, sampling and shuffling");
  train_cmd->add_option("--L_E", tf.sentences, "Sentences to extract");
  train_cmd->add_option("--L_C", tf.words, "Words to keep");
  train_cmd->add_option("--w-cov", tf.w_cov, "Coverage weight");
  train_cmd->add_option("--w-flu", tf.w_flu, "Fluency weight");
  train_cmd->add_option("--lr", tf.lr, "Learning rate");
  train_cmd->add_option("--batch-size", tf.batch_size, "Documents per step");
  train_cmd->add_option("--epochs", tf.epochs, "Passes over the data");
  train_cmd->add_option("--checkpoint-every", tf.checkpoint_every, "Steps between checkpoints");
  train_cmd->add_option("--max-steps", tf.max_steps, "Stop after this many total steps");

  std::string sum_ckpt, sum_data, sum_doc, sum_out, sum_mode = "greedy";
  std::uint64_t sum_seed = 1;
  BudgetFlags sum_budgets;
  auto* sum_cmd = app.add_subcommand("summarize", "Write extractive and compressive summaries");
  sum_cmd->add_option("--checkpoint", sum_ckpt, "Trained checkpoint");
  sum_cmd->add_option("--data", sum_data, "Documents (JSON lines)");
  sum_cmd->add_option("--document", sum_doc, "A single document's text");
  sum_cmd->add_option("--out", sum_out, "Output file (default: stdout)");
  sum_cmd->add_option("--mode", sum_mode, "greedy or sampled");
  sum_cmd->add_option("--seed", sum_seed, "Sampling seed");
  sum_budgets.add(*sum_cmd);

  TextFlags score_flags;
  auto* score_cmd = app.add_subcommand("score", "Print the reward of a summary for a document");
  score_flags.add(*score_cmd);

  TextFlags explain_flags;
  std::string explain_out;
  bool no_heatmap = false;
  auto* explain_cmd = app.add_subcommand("explain", "Export the coverage transport plan");
  explain_flags.add(*explain_cmd);
  explain_cmd->add_option("--out", explain_out, "Output directory");
  explain_cmd->add_flag("--no-heatmap", no_heatmap, "Skip the PGM heatmap");

  std::string ev_data, ev_systems = "lead,leadword", ev_out, ev_mode = "greedy", ev_format = "table";
  std::size_t ev_sample = 1000;
  std::uint64_t ev_seed = 1;
  BudgetFlags ev_budgets;
  auto* ev_cmd = app.add_subcommand("evaluate", "ROUGE of baselines and checkpoints against references");
  ev_cmd->add_option("--data", ev_data, "Documents with reference summaries (JSON lines)");
  ev_cmd->add_option("--systems", ev_systems, "Comma list of lead, leadword, model:<checkpoint>");
  ev_cmd->add_option("--sample-size", ev_sample, "Documents to sample");
  ev_cmd->add_option("--seed", ev_seed, "Sampling seed");
  ev_cmd->add_option("--out", ev_out, "Directory for report.txt and report.json");
  ev_cmd->add_option("--mode", ev_mode, "Decode mode for model systems");
  ev_cmd->add_option("--format", ev_format, "Standard output format: table or json");
  ev_budgets.add(*ev_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) return cmd_train(tf, out);
    if (*sum_cmd) return cmd_summarize(sum_ckpt, sum_data, sum_doc, sum_out, sum_mode, sum_seed, sum_budgets, out);
    if (*score_cmd) return cmd_score(score_flags, out);
    if (*explain_cmd) return cmd_explain(explain_flags, explain_out, !no_heatmap, out);
    if (*ev_cmd)
      return cmd_evaluate(ev_data, ev_systems, ev_sample, ev_seed, ev_out, ev_mode, ev_format, ev_budgets, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"urlcomsum"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace urlcomsum
