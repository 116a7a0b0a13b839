#include "urlcomsum/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace urlcomsum {

namespace {

void check_finite(const ad::Var& v) {
  if (!v.value().allFinite()) throw std::runtime_error("numerical overflow in encoder");
}

std::vector<int> real_ids(const IndexedDocument& idoc, int sentence) {
  const int n = idoc.word_counts[static_cast<std::size_t>(sentence)];
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (int w = 0; w < n; ++w) ids[static_cast<std::size_t>(w)] = idoc.at(sentence, w);
  return ids;
}

SummaryCandidate sentence_candidate(const Document& doc, PointerSequence seq) {
  SummaryCandidate out;
  out.level = SummaryLevel::sentence;
  for (int s : seq.indices) {
    const auto& sent = doc.sentences.at(static_cast<std::size_t>(s));
    for (std::size_t w = 0; w < sent.size(); ++w) {
      out.tokens.push_back(sent[w]);
      out.positions.push_back({s, static_cast<int>(w)});
    }
  }
  out.text = detokenize(out.tokens);
  out.pointers = std::move(seq);
  return out;
}

SummaryCandidate word_candidate(const CompressorInput& input, PointerSequence seq) {
  SummaryCandidate out;
  out.level = SummaryLevel::word;
  std::vector<int> order = seq.indices;
  std::sort(order.begin(), order.end());
  for (int i : order) {
    out.tokens.push_back(input.tokens.at(static_cast<std::size_t>(i)));
    out.positions.push_back(input.positions.at(static_cast<std::size_t>(i)));
  }
  out.text = detokenize(out.tokens);
  out.pointers = std::move(seq);
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (d_emb < 1 || hidden < 1 || layers < 1 || heads < 1 || max_sentences < 1 || max_words < 1)
    throw std::invalid_argument("model config: dimensions must be positive");
  if ((2 * hidden) % heads != 0)
    throw std::invalid_argument("model config: heads must divide 2 * hidden");
}

const char* to_string(DecodeMode mode) { return mode == DecodeMode::greedy ? "greedy" : "sampled"; }

DecodeMode parse_decode_mode(const std::string& s) {
  if (s == "greedy") return DecodeMode::greedy;
  if (s == "sampled" || s == "sample") return DecodeMode::sampled;
  throw std::invalid_argument("unknown decode mode: " + s);
}

double PointerSequence::total_log_prob() const {
  return std::accumulate(step_log_probs.begin(), step_log_probs.end(), 0.0);
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

ExtractorEncoder::ExtractorEncoder(ParamStore& store, const ModelConfig& cfg, Rng& rng) {
  const int rep = cfg.rep_dim();
  const std::string p = "extractor/encoder/";
  word_lstm_ = BiLstm(store, p + "word_lstm", cfg.d_emb, cfg.hidden, cfg.layers, rng);
  word_attn_ = MultiHeadAttention(store, p + "word_attn", rep, cfg.d_emb, rep, cfg.heads, rng);
  word_post_ = BiLstm(store, p + "word_post", 2 * rep, cfg.hidden, cfg.layers, rng);
  sent_lstm_ = BiLstm(store, p + "sent_lstm", rep, cfg.hidden, cfg.layers, rng);
  sent_attn_ = MultiHeadAttention(store, p + "sent_attn", rep, rep, rep, cfg.heads, rng);
  sent_post_ = BiLstm(store, p + "sent_post", 2 * rep, cfg.hidden, cfg.layers, rng);
}

ad::Var ExtractorEncoder::forward(const Binder& bind, const IndexedDocument& idoc,
                                  const EmbeddingTable& emb, ad::RowGradSink* emb_sink) const {
  if (idoc.sentence_count < 1) throw std::invalid_argument("empty document");
  ad::Tape& tape = bind.tape();
  std::vector<ad::Var> sentence_reps;
  for (int s = 0; s < idoc.sentence_count; ++s) {
    const std::vector<int> ids = real_ids(idoc, s);
    if (ids.empty()) throw std::invalid_argument("empty sentence in indexed document");
    const ad::Var xe = ad::gather_rows(tape, emb.matrix, ids, emb_sink);
    const ad::Var le = word_lstm_.forward(bind, xe).sequence;
    const ad::Var ae = word_attn_.forward(bind, le, xe, std::vector<bool>(ids.size(), true));
    const ad::Var cat[] = {le, ae};
    sentence_reps.push_back(word_post_.forward(bind, ad::concat_cols(cat)).summary);
  }
  const ad::Var he_ws = ad::concat_rows(sentence_reps);
  const ad::Var le_s = sent_lstm_.forward(bind, he_ws).sequence;
  const ad::Var ae_s = sent_attn_.forward(
      bind, le_s, he_ws, std::vector<bool>(static_cast<std::size_t>(idoc.sentence_count), true));
  const ad::Var cat[] = {le_s, ae_s};
  ad::Var out = sent_post_.forward(bind, ad::concat_cols(cat)).sequence;
  check_finite(out);
  return out;
}

CompressorEncoder::CompressorEncoder(ParamStore& store, const ModelConfig& cfg, Rng& rng) {
  const int rep = cfg.rep_dim();
  const std::string p = "compressor/encoder/";
  lstm_ = BiLstm(store, p + "word_lstm", cfg.d_emb, cfg.hidden, cfg.layers, rng);
  attn_ = MultiHeadAttention(store, p + "word_attn", rep, cfg.d_emb, rep, cfg.heads, rng);
  post_ = BiLstm(store, p + "word_post", 2 * rep, cfg.hidden, cfg.layers, rng);
}

ad::Var CompressorEncoder::forward(const Binder& bind, std::span<const int> ids,
                                   const std::vector<bool>& mask, const EmbeddingTable& emb,
                                   ad::RowGradSink* emb_sink, Eigen::MatrixXd* attention) const {
  if (mask.size() != ids.size()) throw std::invalid_argument("encode_words: mask size mismatch");
  std::vector<int> real;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (mask[i]) real.push_back(ids[i]);
  if (real.empty()) throw std::invalid_argument("encode_words: no real positions");
  ad::Tape& tape = bind.tape();
  const bool padded = real.size() != ids.size();
  const ad::Var xc_real = ad::gather_rows(tape, emb.matrix, real, emb_sink);
  const ad::Var xc_all = padded ? ad::gather_rows(tape, emb.matrix, ids, emb_sink) : xc_real;
  const ad::Var lc = lstm_.forward(bind, xc_real).sequence;
  const ad::Var ac = attn_.forward(bind, lc, xc_all, mask, attention);
  const ad::Var cat[] = {lc, ac};
  ad::Var out = post_.forward(bind, ad::concat_cols(cat)).sequence;
  check_finite(out);
  return out;
}

PointerNetwork::PointerNetwork(ParamStore& store, std::string prefix, int rep_dim, Rng& rng)
    : prefix_(std::move(prefix)), rep_dim_(rep_dim) {
  const int hd = rep_dim;  // decoder state width
  const double bound = 1.0 / std::sqrt(static_cast<double>(hd));
  init_uniform(store.create(prefix_ + "/cell/W", rep_dim, 4 * hd), bound, rng);
  init_uniform(store.create(prefix_ + "/cell/U", hd, 4 * hd), bound, rng);
  store.create(prefix_ + "/cell/b", 1, 4 * hd).value.middleCols(hd, hd).setOnes();
  init_uniform(store.create(prefix_ + "/start", 1, rep_dim), 0.1, rng);
  init_uniform(store.create(prefix_ + "/W1", rep_dim, rep_dim), bound, rng);
  init_uniform(store.create(prefix_ + "/W2", hd, rep_dim), bound, rng);
  init_uniform(store.create(prefix_ + "/v", 1, rep_dim), bound, rng);
  init_uniform(store.create(prefix_ + "/glimpse_proj", hd + rep_dim, hd),
               1.0 / std::sqrt(static_cast<double>(hd + rep_dim)), rng);
  store.create(prefix_ + "/glimpse_bias", 1, hd);
}

PointerNetwork::Result PointerNetwork::decode(const Binder& bind, ad::Var reps,
                                              const std::vector<bool>& mask, int budget,
                                              DecodeMode mode, Rng* rng,
                                              std::span<const int> forced,
                                              bool keep_distributions) const {
  const auto n = static_cast<std::size_t>(reps.rows());
  if (mask.size() != n) throw std::invalid_argument("decode_pointers: mask size mismatch");
  if (reps.cols() != rep_dim_) throw std::invalid_argument("decode_pointers: width mismatch");
  const auto real = static_cast<int>(std::count(mask.begin(), mask.end(), true));
  if (real == 0) throw std::invalid_argument("decode_pointers: no unmasked positions");
  if (forced.empty() && budget < 1) throw std::invalid_argument("decode_pointers: budget < 1");
  if (forced.empty() && mode == DecodeMode::sampled && rng == nullptr)
    throw std::invalid_argument("decode_pointers: sampling needs an rng");

  ad::Tape& tape = bind.tape();
  const int hd = rep_dim_;
  const ad::Var w = bind(prefix_ + "/cell/W");
  const ad::Var u = bind(prefix_ + "/cell/U");
  const ad::Var b = bind(prefix_ + "/cell/b");
  const ad::Var w2 = bind(prefix_ + "/W2");
  const ad::Var v = bind(prefix_ + "/v");
  const ad::Var proj = bind(prefix_ + "/glimpse_proj");
  const ad::Var proj_b = bind(prefix_ + "/glimpse_bias");
  const ad::Var features = ad::matmul(reps, bind(prefix_ + "/W1"));

  auto scores = [&](ad::Var state) {
    return ad::matmul_nt(v, ad::tanh(ad::add_row(features, ad::matmul(state, w2))));
  };

  Result result;
  result.sequence.mode = mode;
  const int steps = forced.empty() ? std::min(budget, real) : static_cast<int>(forced.size());
  result.sequence.truncated = forced.empty() && budget > real;

  std::vector<bool> available = mask;
  ad::Var input = bind(prefix_ + "/start");
  ad::Var hc = tape.constant(ad::Mat::Zero(1, 2 * hd));
  std::vector<ad::Var> picked;
  for (int k = 0; k < steps; ++k) {
    hc = ad::lstm_step(ad::matmul(input, w), hc, u, b);
    const ad::Var state = ad::slice_cols(hc, 0, hd);
    const ad::Var glimpse = ad::matmul(ad::softmax_rows(scores(state), mask), reps);
    const ad::Var joined[] = {state, glimpse};
    const ad::Var refined = ad::add(ad::matmul(ad::concat_cols(joined), proj), proj_b);
    const ad::Var log_probs = ad::log_softmax_row(scores(refined), available);
    const ad::Mat& lp = log_probs.value();

    int choice = -1;
    if (!forced.empty()) {
      choice = forced[static_cast<std::size_t>(k)];
      if (choice < 0 || static_cast<std::size_t>(choice) >= n || !available[static_cast<std::size_t>(choice)])
        throw std::invalid_argument("decode_pointers: forced index not selectable");
    } else if (mode == DecodeMode::greedy) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        if (available[i] && lp(0, static_cast<Eigen::Index>(i)) > best) {
          best = lp(0, static_cast<Eigen::Index>(i));
          choice = static_cast<int>(i);
        }
      }
    } else {
      const double r = uniform01(*rng);
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!available[i]) continue;
        choice = static_cast<int>(i);
        acc += std::exp(lp(0, static_cast<Eigen::Index>(i)));
        if (r < acc) break;
      }
    }

    if (keep_distributions) {
      Eigen::VectorXd dist = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i)
        if (available[i]) dist(static_cast<Eigen::Index>(i)) = std::exp(lp(0, static_cast<Eigen::Index>(i)));
      result.sequence.step_distributions.push_back(std::move(dist));
    }
    result.sequence.indices.push_back(choice);
    result.sequence.step_log_probs.push_back(lp(0, choice));
    picked.push_back(ad::pick(log_probs, 0, choice));
    available[static_cast<std::size_t>(choice)] = false;
    input = ad::row(reps, choice);
  }
  result.log_prob_sum = picked.empty() ? tape.constant(ad::Mat::Zero(1, 1))
                                       : ad::sum(ad::concat_cols(picked));
  return result;
}

Summarizer::Summarizer(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  ext_enc_ = ExtractorEncoder(params_, cfg_, rng);
  ext_ptr_ = PointerNetwork(params_, "extractor/pointer", cfg_.rep_dim(), rng);
  comp_enc_ = CompressorEncoder(params_, cfg_, rng);
  comp_ptr_ = PointerNetwork(params_, "compressor/pointer", cfg_.rep_dim(), rng);
}

CompressorInput compressor_input(const SummaryCandidate& extractive, int max_words) {
  CompressorInput in;
  std::vector<std::size_t> order(extractive.tokens.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return extractive.positions[a] < extractive.positions[b];
  });
  for (std::size_t i : order) {
    if (extractive.positions[i].word >= max_words) continue;
    in.tokens.push_back(extractive.tokens[i]);
    in.positions.push_back(extractive.positions[i]);
  }
  return in;
}

AgentTrace run_agents(const Binder& bind, const Summarizer& model, const Document& doc,
                      const IndexedDocument& idoc, const Vocab& vocab, const EmbeddingTable& emb,
                      const Budgets& budgets, DecodeMode mode, Rng* rng,
                      const ForcedChoices* forced, ad::RowGradSink* emb_sink,
                      bool keep_distributions) {
  if (doc.empty() || idoc.sentence_count == 0) throw std::invalid_argument("empty document");
  AgentTrace trace;
  const ad::Var sent_reps = model.extractor_encoder().forward(bind, idoc, emb, emb_sink);
  const std::vector<bool> sent_mask(static_cast<std::size_t>(idoc.sentence_count), true);
  auto ext = model.extractor_pointer().decode(
      bind, sent_reps, sent_mask, budgets.sentences, mode, rng,
      forced != nullptr ? std::span<const int>(forced->extractor) : std::span<const int>{},
      keep_distributions);
  trace.extractor_log_prob = ext.log_prob_sum;
  trace.extractive = sentence_candidate(doc, std::move(ext.sequence));

  const CompressorInput input = compressor_input(trace.extractive, model.config().max_words);
  if (input.tokens.empty()) throw std::invalid_argument("compress: extractive summary has no tokens");
  const std::vector<int> ids = vocab.ids(input.tokens);
  const std::vector<bool> word_mask(ids.size(), true);
  const ad::Var word_reps = model.compressor_encoder().forward(bind, ids, word_mask, emb, emb_sink);
  auto comp = model.compressor_pointer().decode(
      bind, word_reps, word_mask, budgets.words, mode, rng,
      forced != nullptr ? std::span<const int>(forced->compressor) : std::span<const int>{},
      keep_distributions);
  trace.compressor_log_prob = comp.log_prob_sum;
  trace.compressive = word_candidate(input, std::move(comp.sequence));
  return trace;
}

Eigen::MatrixXd encode_sentences(const IndexedDocument& idoc, const EmbeddingTable& emb,
                                 const Summarizer& model) {
  ad::Tape tape(false);
  const Binder bind(tape, model.params());
  const ad::Var reps = model.extractor_encoder().forward(bind, idoc, emb);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(idoc.max_sentences, model.config().rep_dim());
  out.topRows(reps.rows()) = reps.value();
  return out;
}

Eigen::MatrixXd encode_words(std::span<const int> ids, const std::vector<bool>& mask,
                             const EmbeddingTable& emb, const Summarizer& model,
                             Eigen::MatrixXd* attention) {
  ad::Tape tape(false);
  const Binder bind(tape, model.params());
  const ad::Var reps = model.compressor_encoder().forward(bind, ids, mask, emb, nullptr, attention);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ids.size()), reps.cols());
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (mask[i]) out.row(static_cast<Eigen::Index>(i)) = reps.value().row(r++);
  return out;
}

PointerSequence decode_pointers(const Eigen::MatrixXd& reps, const std::vector<bool>& mask,
                                int budget, DecodeMode mode, const PointerNetwork& pointer,
                                const ParamStore& params, std::uint64_t seed,
                                bool keep_distributions) {
  ad::Tape tape(false);
  const Binder bind(tape, params);
  Rng rng(seed);
  return pointer.decode(bind, tape.constant(reps), mask, budget, mode, &rng, {}, keep_distributions)
      .sequence;
}

SummaryCandidate extract(const Document& doc, const IndexedDocument& idoc,
                         const EmbeddingTable& emb, const Summarizer& model, int max_sentences_out,
                         DecodeMode mode, std::uint64_t seed) {
  if (max_sentences_out < 1) throw std::invalid_argument("extract: L_E must be >= 1");
  if (doc.empty() || idoc.sentence_count == 0) throw std::invalid_argument("empty document");
  ad::Tape tape(false);
  const Binder bind(tape, model.params());
  Rng rng(seed);
  const ad::Var reps = model.extractor_encoder().forward(bind, idoc, emb);
  auto res = model.extractor_pointer().decode(
      bind, reps, std::vector<bool>(static_cast<std::size_t>(idoc.sentence_count), true),
      max_sentences_out, mode, &rng);
  return sentence_candidate(doc, std::move(res.sequence));
}

SummaryCandidate compress(const SummaryCandidate& extractive, const Vocab& vocab,
                          const EmbeddingTable& emb, const Summarizer& model, int max_words_out,
                          DecodeMode mode, std::uint64_t seed) {
  if (max_words_out < 1) throw std::invalid_argument("compress: L_C must be >= 1");
  const CompressorInput input = compressor_input(extractive, model.config().max_words);
  if (input.tokens.empty()) throw std::invalid_argument("compress: extractive summary has no tokens");
  ad::Tape tape(false);
  const Binder bind(tape, model.params());
  Rng rng(seed);
  const std::vector<int> ids = vocab.ids(input.tokens);
  const std::vector<bool> mask(ids.size(), true);
  const ad::Var reps = model.compressor_encoder().forward(bind, ids, mask, emb);
  auto res = model.compressor_pointer().decode(bind, reps, mask, max_words_out, mode, &rng);
  return word_candidate(input, std::move(res.sequence));
}

SummaryPair summarize(const Document& doc, const Vocab& vocab, const EmbeddingTable& emb,
                      const Summarizer& model, const Budgets& budgets, DecodeMode mode,
                      std::uint64_t seed) {
  if (doc.empty()) throw std::invalid_argument("empty document");
  const IndexedDocument idoc =
      pad_and_index(doc, vocab, model.config().max_sentences, model.config().max_words);
  ad::Tape tape(false);
  const Binder bind(tape, model.params());
  Rng rng(seed);
  AgentTrace trace = run_agents(bind, model, doc, idoc, vocab, emb, budgets, mode, &rng);
  return {std::move(trace.extractive), std::move(trace.compressive)};
}

}  // namespace urlcomsum
