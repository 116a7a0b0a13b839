#pragma once

#include <cmath>
#include <map>
#include <string>

#include "urlcomsum/layers.hpp"

namespace urlcomsum {

struct AdamWConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay. Moment buffers are keyed by parameter
/// name and mirror the parameter shapes.
class AdamW {
 public:
  AdamW() = default;
  AdamW(const ParamStore& params, AdamWConfig cfg);

  /// Applies one update from the gradients currently held in params. With a
  /// filter, only parameters it accepts move (and only their moments update).
  template <typename Filter>
  void step(ParamStore& params, Filter&& accept);
  void step(ParamStore& params) {
    step(params, [](const std::string&) { return true; });
  }

  long steps() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }
  AdamWConfig& config() { return cfg_; }

  std::map<std::string, ad::Mat>& first_moments() { return m_; }
  std::map<std::string, ad::Mat>& second_moments() { return v_; }
  const std::map<std::string, ad::Mat>& first_moments() const { return m_; }
  const std::map<std::string, ad::Mat>& second_moments() const { return v_; }
  void set_steps(long s) { step_ = s; }

 private:
  AdamWConfig cfg_;
  std::map<std::string, ad::Mat> m_, v_;
  long step_ = 0;
};

/// Global L2 norm of all gradients.
double grad_norm(const ParamStore& params);

/// Rescales gradients so the global norm is at most max_norm. Returns the
/// norm before clipping.
double clip_grad_norm(ParamStore& params, double max_norm);

template <typename Filter>
void AdamW::step(ParamStore& params, Filter&& accept) {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (auto& [name, p] : params.all()) {
    if (!accept(name)) continue;
    auto& m = m_.at(name);
    auto& v = v_.at(name);
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * p.grad;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * p.grad.cwiseAbs2();
    p.value *= 1.0 - cfg_.learning_rate * cfg_.weight_decay;
    p.value.array() -= cfg_.learning_rate * (m.array() / bc1) /
                       ((v.array() / bc2).sqrt() + cfg_.epsilon);
  }
}

}  // namespace urlcomsum
