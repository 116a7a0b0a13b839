#include "urlcomsum/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace urlcomsum {

ad::Parameter& ParamStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  auto [it, inserted] = params_.try_emplace(name);
  if (!inserted) throw std::logic_error("duplicate parameter: " + name);
  it->second.value = ad::Mat::Zero(rows, cols);
  it->second.zero_grad();
  return it->second;
}

ad::Parameter& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

const ad::Parameter& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

bool ParamStore::all_finite() const {
  for (const auto& [name, p] : params_)
    if (!p.value.allFinite()) return false;
  return true;
}

ad::Var Binder::operator()(const std::string& name) const {
  if (target_ != nullptr && tape_.recording()) return tape_.param(target_->at(name));
  return tape_.constant(store_.at(name).value);
}

void init_uniform(ad::Parameter& p, double bound, Rng& rng) {
  for (Eigen::Index c = 0; c < p.value.cols(); ++c)
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) p.value(r, c) = uniform(rng, -bound, bound);
}

BiLstm::BiLstm(ParamStore& store, std::string prefix, int input_dim, int hidden, int layers,
               Rng& rng)
    : prefix_(std::move(prefix)), input_dim_(input_dim), hidden_(hidden), layers_(layers) {
  if (hidden < 1 || layers < 1 || input_dim < 1)
    throw std::invalid_argument("BiLstm: dimensions must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (int l = 0; l < layers; ++l) {
    const int in = l == 0 ? input_dim : 2 * hidden;
    for (const char* dir : {"fwd", "bwd"}) {
      const std::string base = prefix_ + "/l" + std::to_string(l) + "/" + dir;
      init_uniform(store.create(base + "/W", in, 4 * hidden), bound, rng);
      init_uniform(store.create(base + "/U", hidden, 4 * hidden), bound, rng);
      auto& b = store.create(base + "/b", 1, 4 * hidden);
      b.value.middleCols(hidden, hidden).setOnes();  // forget gate
    }
  }
}

BiLstm::Output BiLstm::forward(const Binder& bind, ad::Var x) const {
  const Eigen::Index steps = x.rows();
  if (steps == 0) throw std::invalid_argument("BiLstm: empty sequence");
  if (x.cols() != (input_dim_)) throw std::invalid_argument("BiLstm: input width mismatch");
  ad::Tape& tape = bind.tape();
  ad::Var input = x;
  ad::Var last_fwd{}, first_bwd{};
  for (int l = 0; l < layers_; ++l) {
    std::vector<ad::Var> dir_outputs;
    for (int d = 0; d < 2; ++d) {
      const std::string base = prefix_ + "/l" + std::to_string(l) + (d == 0 ? "/fwd" : "/bwd");
      const ad::Var w = bind(base + "/W");
      const ad::Var u = bind(base + "/U");
      const ad::Var b = bind(base + "/b");
      const ad::Var xw = ad::matmul(input, w);
      ad::Var hc = tape.constant(ad::Mat::Zero(1, 2 * hidden_));
      std::vector<ad::Var> hs(static_cast<std::size_t>(steps));
      for (Eigen::Index k = 0; k < steps; ++k) {
        const Eigen::Index t = d == 0 ? k : steps - 1 - k;
        hc = ad::lstm_step(ad::row(xw, t), hc, u, b);
        hs[static_cast<std::size_t>(t)] = ad::slice_cols(hc, 0, hidden_);
      }
      if (l == layers_ - 1) {
        if (d == 0) last_fwd = hs.back();
        else first_bwd = hs.front();
      }
      dir_outputs.push_back(ad::concat_rows(hs));
    }
    input = ad::concat_cols(dir_outputs);
  }
  const ad::Var ends[] = {last_fwd, first_bwd};
  return {input, ad::concat_cols(ends)};
}

MultiHeadAttention::MultiHeadAttention(ParamStore& store, std::string prefix, int q_dim,
                                       int kv_dim, int model_dim, int heads, Rng& rng)
    : prefix_(std::move(prefix)), model_dim_(model_dim), heads_(heads) {
  if (heads < 1 || model_dim % heads != 0)
    throw std::invalid_argument("MultiHeadAttention: head count must divide model width");
  init_uniform(store.create(prefix_ + "/Wq", q_dim, model_dim), 1.0 / std::sqrt(q_dim), rng);
  init_uniform(store.create(prefix_ + "/Wk", kv_dim, model_dim), 1.0 / std::sqrt(kv_dim), rng);
  init_uniform(store.create(prefix_ + "/Wv", kv_dim, model_dim), 1.0 / std::sqrt(kv_dim), rng);
  init_uniform(store.create(prefix_ + "/Wo", model_dim, model_dim), 1.0 / std::sqrt(model_dim),
               rng);
}

ad::Var MultiHeadAttention::forward(const Binder& bind, ad::Var queries, ad::Var keys_values,
                                    const std::vector<bool>& key_mask,
                                    Eigen::MatrixXd* weights) const {
  const ad::Var q = ad::matmul(queries, bind(prefix_ + "/Wq"));
  const ad::Var k = ad::matmul(keys_values, bind(prefix_ + "/Wk"));
  const ad::Var v = ad::matmul(keys_values, bind(prefix_ + "/Wv"));
  const int dk = model_dim_ / heads_;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<ad::Var> heads;
  if (weights != nullptr) *weights = Eigen::MatrixXd::Zero(queries.rows(), keys_values.rows());
  for (int h = 0; h < heads_; ++h) {
    const ad::Var qh = ad::slice_cols(q, h * dk, dk);
    const ad::Var kh = ad::slice_cols(k, h * dk, dk);
    const ad::Var vh = ad::slice_cols(v, h * dk, dk);
    const ad::Var attn = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), inv_sqrt), key_mask);
    if (weights != nullptr) *weights += attn.value() / heads_;
    heads.push_back(ad::matmul(attn, vh));
  }
  return ad::matmul(ad::concat_cols(heads), bind(prefix_ + "/Wo"));
}

}  // namespace urlcomsum
