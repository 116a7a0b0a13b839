#include "urlcomsum/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "urlcomsum/rng.hpp"

namespace urlcomsum {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::size_t Document::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

Tokens Document::flat_tokens() const {
  Tokens out;
  out.reserve(token_count());
  for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j == i) break;
    std::string_view chunk = text.substr(i, j - i);
    std::size_t lead = 0;
    while (lead < chunk.size() && is_punct(chunk[lead])) ++lead;
    if (lead == chunk.size()) {
      for (char c : chunk) out.emplace_back(1, c);
    } else {
      std::size_t trail = chunk.size();
      while (trail > lead && is_punct(chunk[trail - 1])) --trail;
      for (std::size_t k = 0; k < lead; ++k) out.emplace_back(1, chunk[k]);
      out.push_back(lower(chunk.substr(lead, trail - lead)));
      for (std::size_t k = trail; k < chunk.size(); ++k) out.emplace_back(1, chunk[k]);
    }
    i = j;
  }
  return out;
}

Document segment_document(std::string_view raw_text) {
  Document doc;
  doc.raw_text = std::string(raw_text);
  std::size_t start = 0;
  const std::size_t n = raw_text.size();
  auto flush = [&](std::size_t end) {
    Tokens toks = tokenize(raw_text.substr(start, end - start));
    if (!toks.empty()) doc.sentences.push_back(std::move(toks));
    start = end;
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_terminal(raw_text[i])) continue;
    std::size_t j = i + 1;
    if (j < n && !is_space(raw_text[j])) continue;
    std::size_t k = j;
    while (k < n && is_space(raw_text[k])) ++k;
    if (k == n || is_upper(raw_text[k])) flush(j);
  }
  if (start < n) flush(n);
  return doc;
}

Vocab::Vocab() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
}

Vocab::Vocab(std::span<const std::string> tokens) : Vocab() {
  for (const auto& t : tokens) {
    if (token_to_id_.contains(t)) throw std::invalid_argument("duplicate vocab token: " + t);
    add(t);
  }
}

void Vocab::add(std::string token) {
  token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
  id_to_token_.push_back(std::move(token));
}

int Vocab::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }

bool Vocab::contains(std::string_view token) const {
  return token_to_id_.contains(std::string(token));
}

std::vector<int> Vocab::ids(std::span<const std::string> tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

Vocab build_vocab(std::span<const Document> corpus, int min_count) {
  if (corpus.empty()) throw std::invalid_argument("empty corpus");
  std::map<std::string, long> counts;
  for (const auto& doc : corpus)
    for (const auto& sent : doc.sentences)
      for (const auto& tok : sent) ++counts[tok];
  std::vector<std::pair<std::string, long>> kept;
  for (auto& [tok, c] : counts) {
    if (c >= min_count && tok != Vocab::kPadToken && tok != Vocab::kUnkToken)
      kept.emplace_back(tok, c);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, c] : kept) tokens.push_back(tok);
  return Vocab(tokens);
}

EmbeddingTable random_embeddings(const Vocab& vocab, int dim, std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("embedding dimension must be positive");
  EmbeddingTable table;
  table.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(vocab.size()), dim);
  Rng rng(seed);
  for (Eigen::Index r = 1; r < table.matrix.rows(); ++r)
    for (Eigen::Index c = 0; c < dim; ++c) table.matrix(r, c) = uniform(rng, -0.05, 0.05);
  return table;
}

EmbeddingTable load_embeddings(const std::string& path, const Vocab& vocab, int dim,
                               std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);
  EmbeddingTable table = random_embeddings(vocab, dim, seed);
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream is(line);
    std::string token;
    if (!(is >> token)) continue;
    values.clear();
    double v;
    while (is >> v) values.push_back(v);
    if (!is.eof()) {
      throw std::runtime_error("embedding file line " + std::to_string(line_no) +
                               ": non-numeric value");
    }
    if (values.size() != static_cast<std::size_t>(dim)) {
      throw std::runtime_error("embedding file line " + std::to_string(line_no) + ": expected " +
                               std::to_string(dim) + " values, got " +
                               std::to_string(values.size()));
    }
    if (!vocab.contains(token)) continue;
    const int id = vocab.id(token);
    if (id == Vocab::kPad) continue;
    for (int c = 0; c < dim; ++c) table.matrix(id, c) = values[static_cast<std::size_t>(c)];
  }
  return table;
}

IndexedDocument pad_and_index(const Document& doc, const Vocab& vocab, int max_sentences,
                              int max_words) {
  if (max_sentences < 1 || max_words < 1)
    throw std::invalid_argument("pad_and_index: limits must be >= 1");
  IndexedDocument out;
  out.max_sentences = max_sentences;
  out.max_words = max_words;
  out.ids.assign(static_cast<std::size_t>(max_sentences) * max_words, Vocab::kPad);
  out.sentence_mask.assign(static_cast<std::size_t>(max_sentences), false);
  out.word_mask.assign(static_cast<std::size_t>(max_sentences),
                       std::vector<bool>(static_cast<std::size_t>(max_words), false));
  out.word_counts.assign(static_cast<std::size_t>(max_sentences), 0);

  const int n_sent = static_cast<int>(doc.sentences.size());
  out.sentence_count = std::min(n_sent, max_sentences);
  out.truncated_sentences = n_sent - out.sentence_count;
  for (int s = 0; s < out.sentence_count; ++s) {
    const auto& sent = doc.sentences[static_cast<std::size_t>(s)];
    const int n_words = std::min(static_cast<int>(sent.size()), max_words);
    out.truncated_words += static_cast<int>(sent.size()) - n_words;
    out.sentence_mask[static_cast<std::size_t>(s)] = true;
    out.word_counts[static_cast<std::size_t>(s)] = n_words;
    for (int w = 0; w < n_words; ++w) {
      out.ids[static_cast<std::size_t>(s * max_words + w)] = vocab.id(sent[static_cast<std::size_t>(w)]);
      out.word_mask[static_cast<std::size_t>(s)][static_cast<std::size_t>(w)] = true;
    }
  }
  return out;
}

std::vector<Document> read_jsonl(const std::string& path, bool keep_summaries) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("document") || !j["document"].is_string())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": missing \"document\"");
    Document doc = segment_document(j["document"].get<std::string>());
    doc.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                              : std::to_string(line_no);
    if (keep_summaries && j.contains("summary") && j["summary"].is_string())
      doc.source_summary = j["summary"].get<std::string>();
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace urlcomsum
