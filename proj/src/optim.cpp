#include "nvr/optim.hpp"

#include <cmath>
#include <string>

#include "nvr/errors.hpp"

namespace nvr {

void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state,
               std::span<const ParamGroup> groups, const AdamConfig& cfg, float lr_scale) {
  if (params.size() != grads.size()) throw InputError("gradient size does not match parameter size");
  if (state.m.size() != params.size()) state.reset(params.size());

  double sq = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericalError("non-finite gradient at parameter " + std::to_string(i) + " (step " +
                           std::to_string(state.t + 1) + ")");
    }
    sq += static_cast<double>(grads[i]) * grads[i];
  }
  float grad_scale = 1.0f;
  if (cfg.clip_norm > 0.0f) {
    const double norm = std::sqrt(sq);
    if (norm > cfg.clip_norm) grad_scale = static_cast<float>(cfg.clip_norm / norm);
  }

  ++state.t;
  const double t = static_cast<double>(state.t);
  const float c1 = static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(cfg.beta1), t)));
  const float c2 = static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(cfg.beta2), t)));
  const float b1 = cfg.beta1;
  const float b2 = cfg.beta2;
  const float eps = cfg.eps;

  for (const auto& group : groups) {
    const float lr = group.lr * lr_scale;
    for (std::size_t i = group.begin; i < group.end; ++i) {
      const float g = grads[i] * grad_scale;
      float& m = state.m[i];
      float& v = state.v[i];
      m = b1 * m + (1.0f - b1) * g;
      v = b2 * v + (1.0f - b2) * g * g;
      const float m_hat = m * c1;
      const float v_hat = v * c2;
      params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

ParameterStore::ParameterStore(std::vector<float> initial, Precision mode)
    : mode_(mode), master_(std::move(initial)) {
  if (mode_ == Precision::kMixed16) working_.resize(master_.size());
  refresh();
}

void ParameterStore::refresh() {
  if (mode_ == Precision::kMixed16) half_roundtrip(master_, working_);
}

}  // namespace nvr
