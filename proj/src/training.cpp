#include "urlcomsum/training.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

namespace urlcomsum {

RewardContext TrainingData::reward_context(const TrainConfig& cfg) const {
  RewardContext ctx;
  ctx.coverage.vocab = &vocab;
  ctx.coverage.emb = &embeddings;
  ctx.coverage.stopwords = &stopwords;
  ctx.coverage.ot = cfg.ot;
  ctx.lm = &lm;
  ctx.weights = cfg.weights;
  return ctx;
}

TrainingData prepare_training_data(std::vector<Document> docs, const TrainConfig& cfg,
                                   const Vocab* fixed_vocab,
                                   const EmbeddingTable* fixed_embeddings) {
  TrainingData data;
  for (auto& d : docs) {
    d.source_summary.reset();
    if (!d.empty()) data.documents.push_back(std::move(d));
  }
  if (data.documents.empty()) throw std::runtime_error("training data has no usable documents");
  data.vocab = fixed_vocab != nullptr ? *fixed_vocab : build_vocab(data.documents, cfg.min_count);
  if (fixed_embeddings != nullptr) {
    data.embeddings = *fixed_embeddings;
  } else if (!cfg.embeddings_path.empty()) {
    data.embeddings = load_embeddings(cfg.embeddings_path, data.vocab, cfg.model.d_emb, cfg.embedding_seed);
  } else {
    data.embeddings = random_embeddings(data.vocab, cfg.model.d_emb, cfg.embedding_seed);
  }
  data.stopwords = resolve_stopwords(cfg.stopwords_path);
  data.lm = LanguageModelHandle::train(data.documents, cfg.lm_order);
  data.examples.reserve(data.documents.size());
  for (const auto& d : data.documents) {
    TrainExample ex;
    ex.doc = &d;
    ex.idoc = pad_and_index(d, data.vocab, cfg.model.max_sentences, cfg.model.max_words);
    ex.doc_tokens = d.flat_tokens();
    data.examples.push_back(std::move(ex));
  }
  return data;
}

TrainingData load_training_data(const TrainConfig& cfg) {
  if (cfg.data_path.empty()) throw std::invalid_argument("training data path is empty");
  return prepare_training_data(read_jsonl(cfg.data_path, /*keep_summaries=*/false), cfg);
}

TrainState initial_state(const TrainConfig& cfg) {
  TrainState s;
  s.model = Summarizer(cfg.model, cfg.seed);
  AdamWConfig oc;
  oc.learning_rate = cfg.learning_rate;
  oc.weight_decay = cfg.weight_decay;
  s.optimizer = AdamW(s.model.params(), oc);
  s.rng = Rng(cfg.seed ^ 0x5bd1e9955bd1e995ULL);
  return s;
}

StepMetrics scst_step(std::span<const TrainExample* const> batch, TrainState& state,
                      const TrainingData& data, const Budgets& budgets, const RewardFn& reward_fn,
                      const StepOptions& options) {
  if (batch.empty()) throw std::invalid_argument("scst_step: empty batch");
  ParamStore& params = state.model.params();
  params.zero_grad();

  ad::Tape tape(true);
  const Binder bind(tape, params, &params);
  StepMetrics m;
  std::vector<ad::Var> losses;
  bool any_advantage = false;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  for (const TrainExample* ex : batch) {
    AgentTrace sampled = run_agents(bind, state.model, *ex->doc, ex->idoc, data.vocab, data.embeddings,
                                    budgets, DecodeMode::sampled, &state.rng);
    ad::Tape greedy_tape(false);
    const Binder greedy_bind(greedy_tape, params);
    const AgentTrace greedy = run_agents(greedy_bind, state.model, *ex->doc, ex->idoc, data.vocab,
                                         data.embeddings, budgets, DecodeMode::greedy, nullptr);

    const RewardBreakdown rs = reward_fn(*ex, sampled.compressive);
    const RewardBreakdown rg = reward_fn(*ex, greedy.compressive);
    const double advantage = rs.total - rg.total;
    any_advantage = any_advantage || advantage != 0.0;
    state.stats.add(rs.total, rg.total);

    m.r_sampled += rs.total * inv_batch;
    m.r_baseline += rg.total * inv_batch;
    m.coverage += rs.coverage * inv_batch;
    m.fluency += rs.fluency * inv_batch;
    m.advantages.push_back(advantage);
    m.sampled_choices.push_back({sampled.extractive.pointers.indices, sampled.compressive.pointers.indices});
    m.sampled_log_probs.push_back(sampled.extractor_log_prob.scalar() + sampled.compressor_log_prob.scalar());

    std::vector<ad::Var> terms;
    const auto n_ext = static_cast<double>(sampled.extractive.pointers.indices.size());
    const auto n_comp = static_cast<double>(sampled.compressive.pointers.indices.size());
    if (options.update_extractor) terms.push_back(ad::scale(sampled.extractor_log_prob, 1.0 / n_ext));
    if (options.update_compressor) terms.push_back(ad::scale(sampled.compressor_log_prob, 1.0 / n_comp));
    if (terms.empty()) continue;
    losses.push_back(ad::scale(ad::sum(ad::concat_cols(terms)), -advantage * inv_batch));
  }

  m.step = ++state.step;
  if (losses.empty() || !any_advantage) {
    m.skipped = true;
    m.skip_reason = "zero advantage";
    return m;
  }
  const ad::Var loss = ad::sum(ad::concat_cols(losses));
  m.loss = loss.scalar();
  if (!std::isfinite(m.loss) || !std::isfinite(m.r_sampled) || !std::isfinite(m.r_baseline)) {
    m.skipped = true;
    m.skip_reason = "non-finite loss";
    std::cerr << "warning: step " << m.step << " skipped: non-finite loss\n";
    return m;
  }
  tape.backward(loss);
  if (!options.apply_update) {
    m.grad_norm = grad_norm(params);
    return m;
  }
  m.grad_norm = clip_grad_norm(params, options.grad_clip_norm);
  state.optimizer.step(params, [&](const std::string& name) {
    return Summarizer::is_extractor_param(name) ? options.update_extractor : options.update_compressor;
  });
  return m;
}

double sequence_log_prob(const TrainExample& ex, const Summarizer& model, const TrainingData& data,
                         const Budgets& budgets, const ForcedChoices& choices) {
  ad::Tape tape(false);
  const Binder bind(tape, model.params());
  const AgentTrace t = run_agents(bind, model, *ex.doc, ex.idoc, data.vocab, data.embeddings, budgets,
                                  DecodeMode::greedy, nullptr, &choices);
  return t.extractor_log_prob.scalar() + t.compressor_log_prob.scalar();
}

double mean_greedy_reward(const Summarizer& model, const TrainingData& data, const TrainConfig& cfg) {
  const RewardContext ctx = data.reward_context(cfg);
  double total = 0.0;
  for (const auto& ex : data.examples) {
    ad::Tape tape(false);
    const Binder bind(tape, model.params());
    const AgentTrace t = run_agents(bind, model, *ex.doc, ex.idoc, data.vocab, data.embeddings,
                                    cfg.budgets, DecodeMode::greedy, nullptr);
    total += total_reward(ex.doc_tokens, t.compressive.tokens, ctx).total;
  }
  return total / static_cast<double>(data.examples.size());
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, long epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(epoch + 1)));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  return order;
}

Checkpoint make_checkpoint(const TrainState& state, const TrainingData& data, const TrainConfig& cfg,
                           std::uint64_t model_seed) {
  Checkpoint c;
  c.model_config = state.model.config();
  c.model_seed = model_seed;
  c.train_config = cfg.to_json();
  c.vocab = data.vocab;
  c.embeddings = data.embeddings;
  c.params = state.model.params();
  c.optimizer = state.optimizer;
  c.step = state.step;
  c.rng_state = rng_state(state.rng);
  c.stats = state.stats;
  return c;
}

namespace {

nlohmann::json metrics_json(const StepMetrics& m) {
  nlohmann::json j = {{"step", m.step},          {"loss", m.loss}, {"r_sampled", m.r_sampled},
                      {"r_baseline", m.r_baseline}, {"cov", m.coverage}, {"flu", m.fluency}};
  if (m.skipped) j["skipped"] = m.skip_reason;
  return j;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::optional<std::filesystem::path>& resume_from) {
  cfg.validate();
  if (cfg.out_dir.empty()) throw std::invalid_argument("training output directory is empty");
  TrainingData data = load_training_data(cfg);

  TrainState state;
  std::uint64_t model_seed = cfg.seed;
  if (resume_from) {
    const Checkpoint ckpt = load_checkpoint(*resume_from);
    if (!(ckpt.vocab == data.vocab))
      throw CheckpointError("checkpoint vocabulary does not match the training data");
    if (!ckpt.optimizer) throw CheckpointError("checkpoint has no optimizer state to resume from");
    model_seed = ckpt.model_seed;
    state.model = restore_model(ckpt);
    state.optimizer = *ckpt.optimizer;
    state.optimizer.config().learning_rate = cfg.learning_rate;
    state.optimizer.config().weight_decay = cfg.weight_decay;
    state.step = ckpt.step;
    restore_rng_state(state.rng, ckpt.rng_state);
    state.stats = ckpt.stats;
    data.embeddings = ckpt.embeddings;
  } else {
    state = initial_state(cfg);
  }

  const std::filesystem::path out(cfg.out_dir);
  std::filesystem::create_directories(out);
  TrainResult result;
  result.checkpoint = out / "checkpoint.bin";
  result.metrics = out / "metrics.jsonl";
  std::ofstream log(result.metrics, resume_from ? std::ios::app : std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write metrics log: " + result.metrics.string());

  const std::size_t n = data.examples.size();
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  const long steps_per_epoch = static_cast<long>((n + batch_size - 1) / batch_size);
  long total = steps_per_epoch * cfg.epochs;
  if (cfg.max_steps >= 0) total = std::min(total, cfg.max_steps);
  const RewardContext ctx = data.reward_context(cfg);
  const RewardFn reward_fn = [&ctx](const TrainExample& ex, const SummaryCandidate& summary) {
    return total_reward(ex.doc_tokens, summary.tokens, ctx);
  };

  long cached_epoch = -1;
  std::vector<std::size_t> order;
  std::vector<const TrainExample*> batch;
  while (state.step < total) {
    const long epoch = state.step / steps_per_epoch;
    const auto b = static_cast<std::size_t>(state.step % steps_per_epoch);
    if (epoch != cached_epoch) {
      order = epoch_order(cfg.seed, epoch, n);
      cached_epoch = epoch;
    }
    batch.clear();
    for (std::size_t i = b * batch_size; i < std::min(n, (b + 1) * batch_size); ++i)
      batch.push_back(&data.examples[order[i]]);

    StepOptions opts;
    opts.grad_clip_norm = cfg.grad_clip_norm;
    if (cfg.schedule == Schedule::staged) {
      const bool first_half = epoch < (cfg.epochs + 1) / 2;
      opts.update_extractor = first_half;
      opts.update_compressor = !first_half;
    }
    StepMetrics m = scst_step(batch, state, data, cfg.budgets, reward_fn, opts);
    log << metrics_json(m).dump() << '\n';
    log.flush();
    if (!log) throw std::runtime_error("error writing metrics log: " + result.metrics.string());
    result.history.push_back(std::move(m));
    if (cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0)
      save_checkpoint(make_checkpoint(state, data, cfg, model_seed), result.checkpoint);
  }
  save_checkpoint(make_checkpoint(state, data, cfg, model_seed), result.checkpoint);
  result.steps = state.step;
  return result;
}

}  // namespace urlcomsum
