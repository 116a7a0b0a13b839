#include "urlcomsum/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace urlcomsum {

namespace {

constexpr char kMagic[8] = {'U', 'R', 'L', 'C', 'S', 'U', 'M', '\0'};

nlohmann::json model_config_json(const ModelConfig& c) {
  return {{"d_emb", c.d_emb},     {"hidden", c.hidden},
          {"layers", c.layers},   {"heads", c.heads},
          {"max_sentences", c.max_sentences}, {"max_words", c.max_words}};
}

ModelConfig model_config_from(const nlohmann::json& j) {
  ModelConfig c;
  c.d_emb = j.at("d_emb");
  c.hidden = j.at("hidden");
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.max_sentences = j.at("max_sentences");
  c.max_words = j.at("max_words");
  return c;
}

struct TensorRef {
  std::string name;
  const ad::Mat* mat;
};

void write_raw(std::ostream& out, const void* data, std::size_t bytes) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

void read_raw(std::istream& in, void* data, std::size_t bytes, const std::string& what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes)
    throw CheckpointError("checkpoint truncated while reading " + what);
}

}  // namespace

void RewardStats::add(double sampled, double baseline) {
  ++count;
  mean_sampled += (sampled - mean_sampled) / static_cast<double>(count);
  mean_baseline += (baseline - mean_baseline) / static_cast<double>(count);
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::vector<TensorRef> tensors;
  tensors.push_back({"emb", &ckpt.embeddings.matrix});
  for (const auto& [name, p] : ckpt.params.all()) tensors.push_back({"param/" + name, &p.value});
  if (ckpt.optimizer) {
    for (const auto& [name, m] : ckpt.optimizer->first_moments()) tensors.push_back({"optim/m/" + name, &m});
    for (const auto& [name, v] : ckpt.optimizer->second_moments()) tensors.push_back({"optim/v/" + name, &v});
  }

  nlohmann::json header;
  header["model"] = model_config_json(ckpt.model_config);
  header["model_seed"] = ckpt.model_seed;
  header["train_config"] = ckpt.train_config;
  std::vector<std::string> vocab_tokens(ckpt.vocab.tokens().begin() + 2, ckpt.vocab.tokens().end());
  header["vocab"] = vocab_tokens;
  header["step"] = ckpt.step;
  header["rng_state"] = ckpt.rng_state;
  header["stats"] = {{"count", ckpt.stats.count},
                     {"mean_sampled", ckpt.stats.mean_sampled},
                     {"mean_baseline", ckpt.stats.mean_baseline}};
  if (ckpt.optimizer) {
    const auto& c = ckpt.optimizer->config();
    header["optimizer"] = {{"learning_rate", c.learning_rate}, {"beta1", c.beta1},
                           {"beta2", c.beta2},                 {"epsilon", c.epsilon},
                           {"weight_decay", c.weight_decay},   {"steps", ckpt.optimizer->steps()}};
  }
  auto& index = header["tensors"] = nlohmann::json::array();
  for (const auto& t : tensors) index.push_back({{"name", t.name}, {"rows", t.mat->rows()}, {"cols", t.mat->cols()}});

  const std::string text = header.dump();
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + tmp.string());
    write_raw(out, kMagic, sizeof kMagic);
    const std::uint32_t version = kCheckpointVersion;
    write_raw(out, &version, sizeof version);
    const std::uint64_t len = text.size();
    write_raw(out, &len, sizeof len);
    write_raw(out, text.data(), text.size());
    for (const auto& t : tensors)
      write_raw(out, t.mat->data(), static_cast<std::size_t>(t.mat->size()) * sizeof(double));
    out.flush();
    if (!out) throw std::runtime_error("error writing checkpoint: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  char magic[8];
  read_raw(in, magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw CheckpointError("not a checkpoint file: " + path.string());
  std::uint32_t version = 0;
  read_raw(in, &version, sizeof version, "version");
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  std::uint64_t len = 0;
  read_raw(in, &len, sizeof len, "header length");
  if (len > (1ull << 32)) throw CheckpointError("checkpoint header too large");
  std::string text(len, '\0');
  read_raw(in, text.data(), text.size(), "header");

  Checkpoint ckpt;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    ckpt.model_config = model_config_from(header.at("model"));
    ckpt.model_seed = header.at("model_seed");
    ckpt.train_config = header.value("train_config", nlohmann::json::object());
    const auto tokens = header.at("vocab").get<std::vector<std::string>>();
    ckpt.vocab = Vocab(tokens);
    ckpt.step = header.at("step");
    ckpt.rng_state = header.at("rng_state");
    const auto& st = header.at("stats");
    ckpt.stats = {st.at("count"), st.at("mean_sampled"), st.at("mean_baseline")};
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (header.contains("optimizer")) {
    const auto& o = header["optimizer"];
    AdamWConfig c{o.at("learning_rate"), o.at("beta1"), o.at("beta2"), o.at("epsilon"), o.at("weight_decay")};
    ckpt.optimizer.emplace();
    ckpt.optimizer->config() = c;
    ckpt.optimizer->set_steps(o.at("steps").get<long>());
  }

  for (const auto& t : header.at("tensors")) {
    const std::string name = t.at("name");
    const Eigen::Index rows = t.at("rows"), cols = t.at("cols");
    ad::Mat m(rows, cols);
    read_raw(in, m.data(), static_cast<std::size_t>(m.size()) * sizeof(double), name);
    if (name == "emb") {
      ckpt.embeddings.matrix = std::move(m);
    } else if (name.starts_with("param/")) {
      ckpt.params.create(name.substr(6), rows, cols).value = std::move(m);
    } else if (name.starts_with("optim/m/") && ckpt.optimizer) {
      ckpt.optimizer->first_moments()[name.substr(8)] = std::move(m);
    } else if (name.starts_with("optim/v/") && ckpt.optimizer) {
      ckpt.optimizer->second_moments()[name.substr(8)] = std::move(m);
    } else {
      throw CheckpointError("unexpected tensor in checkpoint: " + name);
    }
  }
  if (ckpt.embeddings.rows() != ckpt.vocab.size())
    throw CheckpointError("checkpoint embedding rows do not match its vocabulary");
  return ckpt;
}

Summarizer restore_model(const Checkpoint& ckpt) {
  Summarizer model(ckpt.model_config, ckpt.model_seed);
  if (ckpt.embeddings.dim() != ckpt.model_config.d_emb)
    throw CheckpointError("checkpoint embedding width does not match d_emb");
  for (auto& [name, p] : model.params().all()) {
    if (!ckpt.params.contains(name)) throw CheckpointError("checkpoint lacks parameter " + name);
    const auto& src = ckpt.params.at(name).value;
    if (src.rows() != p.value.rows() || src.cols() != p.value.cols())
      throw CheckpointError("checkpoint shape mismatch for " + name);
    p.value = src;
  }
  if (ckpt.params.all().size() != model.params().all().size())
    throw CheckpointError("checkpoint holds parameters the model does not define");
  return model;
}

}  // namespace urlcomsum

namespace urlcomsum {

ModelBundle load_model_bundle(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  ModelBundle b{restore_model(ckpt), std::move(ckpt.vocab), std::move(ckpt.embeddings)};
  return b;
}

}  // namespace urlcomsum
