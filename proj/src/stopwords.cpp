#include "urlcomsum/stopwords.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace urlcomsum {

const StopwordSet& builtin_stopwords() {
  static const StopwordSet words = {
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your", "yours",
    "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself",
    "it", "its", "itself", "they", "them", "their", "theirs", "themselves", "what", "which",
    "who", "whom", "this", "that", "these", "those", "am", "is", "are", "was", "were", "be",
    "been", "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an",
    "the", "and", "but", "if", "or", "because", "as", "until", "while", "of", "at", "by",
    "for", "with", "about", "against", "between", "into", "through", "during", "before",
    "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
    "under", "again", "further", "then", "once", "here", "there", "when", "where", "why",
    "how", "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no",
    "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will",
    "just", "don", "should", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren",
    "couldn", "didn", "doesn", "hadn", "hasn", "haven", "isn", "ma", "mightn", "mustn",
    "needn", "shan", "shouldn", "wasn", "weren", "won", "wouldn", ".", ",", ";", ":", "!", "?",
    "'", "\"", "`", "(", ")", "[", "]", "{", "}", "-", "_", "/", "\\", "@", "#", "$", "%", "^",
    "&", "*", "+", "=", "<", ">", "|", "~",
  };
  return words;
}

StopwordSet load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stopword file: " + path);
  StopwordSet out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    out.insert(line);
  }
  return out;
}

StopwordSet resolve_stopwords(const std::string& explicit_path) {
  if (const char* env = std::getenv("URLCOMSUM_STOPWORDS"); env != nullptr && *env != '\0')
    return load_stopwords(env);
  if (!explicit_path.empty()) return load_stopwords(explicit_path);
  return builtin_stopwords();
}

}  // namespace urlcomsum
