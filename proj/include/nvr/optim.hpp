#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nvr/precision.hpp"

namespace nvr {

struct AdamConfig {
  float lr_tables = 1e-2f;
  float lr_mlp = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  // Multiplies both learning rates once per completed epoch. 1 = constant.
  float lr_decay = 1.0f;
  // Global gradient-norm clip; 0 disables.
  float clip_norm = 0.0f;
};

/// Moments mirror the parameter vector; t counts completed steps.
struct AdamState {
  std::uint64_t t = 0;
  std::vector<float> m;
  std::vector<float> v;

  void reset(std::size_t n) {
    t = 0;
    m.assign(n, 0.0f);
    v.assign(n, 0.0f);
  }
};

/// Half-open slice of the parameter vector sharing one learning rate.
struct ParamGroup {
  std::size_t begin;
  std::size_t end;
  float lr;
};

/// One bias-corrected Adam update of `params` in place. Throws NumericalError
/// (before touching anything) if a gradient is non-finite.
void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state,
               std::span<const ParamGroup> groups, const AdamConfig& cfg, float lr_scale = 1.0f);

/// Trainable storage under a precision policy. In full32 the working copy is
/// the master copy. In mixed16 the optimizer updates a 32-bit master copy and
/// the network reads a binary16-rounded working copy refreshed after every
/// update.
class ParameterStore {
 public:
  ParameterStore(std::vector<float> initial, Precision mode);

  Precision mode() const noexcept { return mode_; }
  std::span<float> master() noexcept { return master_; }
  std::span<const float> master() const noexcept { return master_; }
  std::span<const float> working() const noexcept {
    return mode_ == Precision::kMixed16 ? std::span<const float>(working_) : std::span<const float>(master_);
  }
  std::size_t size() const noexcept { return master_.size(); }

  void refresh();

 private:
  Precision mode_;
  std::vector<float> master_;
  std::vector<float> working_;
};

}  // namespace nvr
