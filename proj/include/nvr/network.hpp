#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nvr/encoding.hpp"

namespace nvr {

/// Fully-connected ReLU network with a single linear output.
struct MlpConfig {
  int input_width = 48;
  int hidden_layers = 2;
  int hidden_width = 64;
  int output_width = 1;

  struct Layer {
    int in;
    int out;
    std::size_t weight_offset;  // out x in, row-major
    std::size_t bias_offset;
  };
  std::vector<Layer> layers() const;
  std::size_t param_count() const;
  void validate() const;

  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

/// Activations retained by forward: act[0] is the input batch, act[i] the
/// post-ReLU output of hidden layer i. `delta` is backward scratch.
template <typename Scalar>
struct MlpCache {
  std::vector<Matrix<Scalar>> act;
  std::vector<Matrix<Scalar>> delta;
};

/// He-uniform weights in +-sqrt(6 / fan_in), zero biases.
void init_mlp(const MlpConfig& cfg, std::uint64_t seed, std::span<float> params);

/// input: input_width x B; output: output_width x B (linear head, no clamp).
template <typename Scalar>
void mlp_forward(const MlpConfig& cfg, std::span<const Scalar> params, const Matrix<Scalar>& input,
                 MlpCache<Scalar>& cache, Matrix<Scalar>& output);

/// Accumulates parameter gradients into grad_params and, when grad_input is
/// non-null, writes d(loss)/d(input).
template <typename Scalar>
void mlp_backward(const MlpConfig& cfg, std::span<const Scalar> params, MlpCache<Scalar>& cache,
                  const Matrix<Scalar>& grad_output, std::span<Scalar> grad_params, Matrix<Scalar>* grad_input);

}  // namespace nvr
