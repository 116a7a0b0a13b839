#pragma once

#include <map>
#include <string>
#include <vector>

#include "urlcomsum/autodiff.hpp"
#include "urlcomsum/rng.hpp"

namespace urlcomsum {

/// Named parameter arrays, ordered by module path.
class ParamStore {
 public:
  ad::Parameter& create(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  ad::Parameter& at(const std::string& name);
  const ad::Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.contains(name); }

  std::map<std::string, ad::Parameter>& all() { return params_; }
  const std::map<std::string, ad::Parameter>& all() const { return params_; }

  void zero_grad();
  std::size_t scalar_count() const;
  bool all_finite() const;

 private:
  std::map<std::string, ad::Parameter> params_;
};

/// Turns parameter names into tape nodes for one forward pass. With a
/// gradient target the nodes accumulate into it on backward(); otherwise
/// parameters enter the tape as constants and the store is never written.
class Binder {
 public:
  Binder(ad::Tape& tape, const ParamStore& store, ParamStore* grad_target = nullptr)
      : tape_(tape), store_(store), target_(grad_target) {}

  ad::Var operator()(const std::string& name) const;
  ad::Tape& tape() const { return tape_; }

 private:
  ad::Tape& tape_;
  const ParamStore& store_;
  ParamStore* target_;
};

/// Stacked bidirectional LSTM. Each layer reads the concatenated forward and
/// backward outputs of the layer below.
class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(ParamStore& store, std::string prefix, int input_dim, int hidden, int layers, Rng& rng);

  struct Output {
    ad::Var sequence;  // T x 2h
    ad::Var summary;   // 1 x 2h: last forward state, first backward state
  };
  Output forward(const Binder& bind, ad::Var x) const;

  int hidden() const { return hidden_; }

 private:
  std::string prefix_;
  int input_dim_ = 0;
  int hidden_ = 0;
  int layers_ = 0;
};

/// Scaled dot-product attention with k heads. Queries project from q_dim,
/// keys and values from kv_dim, all into model_dim.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& store, std::string prefix, int q_dim, int kv_dim, int model_dim,
                     int heads, Rng& rng);

  /// key_mask[s] == false excludes key s. If weights is given it receives the
  /// head-averaged attention matrix (T x S).
  ad::Var forward(const Binder& bind, ad::Var queries, ad::Var keys_values,
                  const std::vector<bool>& key_mask, Eigen::MatrixXd* weights = nullptr) const;

 private:
  std::string prefix_;
  int model_dim_ = 0;
  int heads_ = 0;
};

void init_uniform(ad::Parameter& p, double bound, Rng& rng);

}  // namespace urlcomsum
