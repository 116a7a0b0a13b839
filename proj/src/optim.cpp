#include "urlcomsum/optim.hpp"

#include <cmath>

namespace urlcomsum {

AdamW::AdamW(const ParamStore& params, AdamWConfig cfg) : cfg_(cfg) {
  for (const auto& [name, p] : params.all()) {
    m_[name] = ad::Mat::Zero(p.value.rows(), p.value.cols());
    v_[name] = ad::Mat::Zero(p.value.rows(), p.value.cols());
  }
}

double grad_norm(const ParamStore& params) {
  double sq = 0.0;
  for (const auto& [name, p] : params.all()) sq += p.grad.squaredNorm();
  return std::sqrt(sq);
}

double clip_grad_norm(ParamStore& params, double max_norm) {
  const double norm = grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [name, p] : params.all()) p.grad *= s;
  }
  return norm;
}

}  // namespace urlcomsum
