#include "urlcomsum/config.hpp"

#include <fstream>
#include <stdexcept>

namespace urlcomsum {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    T out{};
    if constexpr (std::is_same_v<T, double>) out = std::stod(value, &used);
    else if constexpr (std::is_same_v<T, std::uint64_t>) out = std::stoull(value, &used);
    else out = static_cast<T>(std::stol(value, &used));
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad value for " + key + ": '" + value + "'");
  }
}

}  // namespace

std::optional<Budgets> profile_budgets(const std::string& profile) {
  if (profile == "cnndm") return Budgets{3, 58};
  if (profile == "newsroom") return Budgets{2, 26};
  if (profile == "xsum") return Budgets{2, 24};
  return std::nullopt;
}

KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  KeyValues kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void TrainConfig::apply(const KeyValues& kv) {
  // A profile sets both budgets; explicit L_E / L_C in the same file win.
  if (const auto it = kv.find("profile"); it != kv.end()) {
    auto b = profile_budgets(it->second);
    if (!b) throw std::invalid_argument("config: unknown profile '" + it->second + "'");
    budgets = *b;
  }
  for (const auto& [key, value] : kv) {
    if (key == "learning_rate" || key == "lr") learning_rate = parse_number<double>(key, value);
    else if (key == "batch_size") batch_size = parse_number<int>(key, value);
    else if (key == "epochs") epochs = parse_number<int>(key, value);
    else if (key == "weight_decay") weight_decay = parse_number<double>(key, value);
    else if (key == "grad_clip_norm") grad_clip_norm = parse_number<double>(key, value);
    else if (key == "L_E") budgets.sentences = parse_number<int>(key, value);
    else if (key == "L_C") budgets.words = parse_number<int>(key, value);
    else if (key == "profile") continue;
    else if (key == "w_cov") weights.coverage = parse_number<double>(key, value);
    else if (key == "w_flu") weights.fluency = parse_number<double>(key, value);
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else if (key == "embedding_seed") embedding_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "data") data_path = value;
    else if (key == "embeddings") embeddings_path = value;
    else if (key == "stopwords") stopwords_path = value;
    else if (key == "out") out_dir = value;
    else if (key == "checkpoint_every") checkpoint_every = parse_number<int>(key, value);
    else if (key == "max_steps") max_steps = parse_number<long>(key, value);
    else if (key == "min_count") min_count = parse_number<int>(key, value);
    else if (key == "lm_order") lm_order = parse_number<int>(key, value);
    else if (key == "schedule") {
      if (value == "joint") schedule = Schedule::joint;
      else if (value == "staged") schedule = Schedule::staged;
      else throw std::invalid_argument("config: schedule must be joint or staged");
    } else if (key == "d_emb") model.d_emb = parse_number<int>(key, value);
    else if (key == "hidden") model.hidden = parse_number<int>(key, value);
    else if (key == "layers") model.layers = parse_number<int>(key, value);
    else if (key == "heads") model.heads = parse_number<int>(key, value);
    else if (key == "max_sentences") model.max_sentences = parse_number<int>(key, value);
    else if (key == "max_words") model.max_words = parse_number<int>(key, value);
    else if (key == "ot_solver") ot.solver = parse_ot_solver(value);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("config: learning_rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
  if (weight_decay < 0.0) throw std::invalid_argument("config: weight_decay must be >= 0");
  if (!(grad_clip_norm > 0.0)) throw std::invalid_argument("config: grad_clip_norm must be positive");
  if (budgets.sentences < 1 || budgets.words < 1)
    throw std::invalid_argument("config: budgets must be >= 1");
  if (weights.coverage < 0.0 || weights.fluency < 0.0)
    throw std::invalid_argument("config: reward weights must be non-negative");
  if (min_count < 1) throw std::invalid_argument("config: min_count must be >= 1");
  if (lm_order < 1) throw std::invalid_argument("config: lm_order must be >= 1");
  model.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {
      {"learning_rate", learning_rate},
      {"batch_size", batch_size},
      {"epochs", epochs},
      {"weight_decay", weight_decay},
      {"grad_clip_norm", grad_clip_norm},
      {"L_E", budgets.sentences},
      {"L_C", budgets.words},
      {"w_cov", weights.coverage},
      {"w_flu", weights.fluency},
      {"seed", seed},
      {"embedding_seed", embedding_seed},
      {"data", data_path},
      {"embeddings", embeddings_path},
      {"stopwords", stopwords_path},
      {"out", out_dir},
      {"checkpoint_every", checkpoint_every},
      {"max_steps", max_steps},
      {"min_count", min_count},
      {"lm_order", lm_order},
      {"schedule", schedule == Schedule::joint ? "joint" : "staged"},
      {"ot_solver", to_string(ot.solver)},
      {"d_emb", model.d_emb},
      {"hidden", model.hidden},
      {"layers", model.layers},
      {"heads", model.heads},
      {"max_sentences", model.max_sentences},
      {"max_words", model.max_words},
  };
}

}  // namespace urlcomsum
