#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace urlcomsum {

using Tokens = std::vector<std::string>;

struct Document {
  std::string id;
  std::string raw_text;
  std::vector<Tokens> sentences;
  // Reference summary. Only the evaluation path reads it.
  std::optional<std::string> source_summary;

  bool empty() const { return sentences.empty(); }
  std::size_t token_count() const;
  Tokens flat_tokens() const;
};

/// Lowercased whitespace tokenization with punctuation detached from the
/// start and end of each chunk as single-character tokens.
Tokens tokenize(std::string_view text);

/// Splits on '.', '!' or '?' followed by whitespace and an uppercase letter,
/// or by the end of the text. Whitespace-only input gives zero sentences.
Document segment_document(std::string_view raw_text);

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocab();
  /// Takes the non-special tokens in id order (ids start at 2).
  explicit Vocab(std::span<const std::string> tokens);

  int id(std::string_view token) const;
  const std::string& token(int id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return id_to_token_.size(); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  std::vector<int> ids(std::span<const std::string> tokens) const;

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  void add(std::string token);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

/// Frequency-descending, then lexicographic. Throws on an empty corpus.
Vocab build_vocab(std::span<const Document> corpus, int min_count = 1);

struct EmbeddingTable {
  Eigen::MatrixXd matrix;  // vocab_size x dim

  int dim() const { return static_cast<int>(matrix.cols()); }
  std::size_t rows() const { return static_cast<std::size_t>(matrix.rows()); }
};

inline constexpr std::uint64_t kDefaultEmbeddingSeed = 20221;

/// Rows drawn from uniform(-0.05, 0.05); PAD row zero.
EmbeddingTable random_embeddings(const Vocab& vocab, int dim,
                                 std::uint64_t seed = kDefaultEmbeddingSeed);

/// Reads "token v1 ... v_dim" lines. Vocab tokens found in the file take the
/// file vector verbatim; the rest keep their seeded random row.
EmbeddingTable load_embeddings(const std::string& path, const Vocab& vocab, int dim,
                               std::uint64_t seed = kDefaultEmbeddingSeed);

struct IndexedDocument {
  int max_sentences = 0;
  int max_words = 0;
  std::vector<int> ids;  // max_sentences * max_words, row-major
  std::vector<bool> sentence_mask;
  std::vector<std::vector<bool>> word_mask;
  int sentence_count = 0;
  std::vector<int> word_counts;  // per sentence slot, 0 for pad slots
  int truncated_sentences = 0;
  int truncated_words = 0;

  int at(int sentence, int word) const { return ids[sentence * max_words + word]; }
};

IndexedDocument pad_and_index(const Document& doc, const Vocab& vocab, int max_sentences,
                              int max_words);

/// JSON-lines with keys "id", "document" and optional "summary". With
/// keep_summaries=false the reference field is dropped at parse time.
std::vector<Document> read_jsonl(const std::string& path, bool keep_summaries);

}  // namespace urlcomsum
