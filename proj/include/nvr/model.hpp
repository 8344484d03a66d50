#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "nvr/encoding.hpp"
#include "nvr/network.hpp"
#include "nvr/precision.hpp"
#include "nvr/volume.hpp"

namespace nvr {

/// Shapes of a coordinate network: the input encoding plus the MLP that
/// consumes it. All trainables live in one flat vector laid out as
/// [hash tables (if any)][MLP layer 0 W, b][layer 1 W, b]...
struct ModelSpec {
  std::variant<HashConfig, BaselineEncoding> encoder;
  MlpConfig mlp;

  static ModelSpec hash(const HashConfig& cfg, int hidden_layers = 2, int hidden_width = 64);
  static ModelSpec baseline(const BaselineEncoding& enc, int hidden_layers, int hidden_width);

  bool is_hash() const noexcept { return std::holds_alternative<HashConfig>(encoder); }
  int encoder_width() const;
  std::size_t encoder_param_count() const;
  std::size_t param_count() const { return encoder_param_count() + mlp.param_count(); }
  std::span<const float> mlp_params(std::span<const float> all) const { return all.subspan(encoder_param_count()); }
  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// A trained (or initial) coordinate network plus what is needed to map its
/// output back onto a grid: target dims and the intensity normalization.
struct Model {
  ModelSpec spec;
  std::vector<float> params;
  Dims dims;
  float vmin = 0.0f;
  float vmax = 1.0f;
  ScalarDtype source_dtype;
  Precision precision = Precision::kFull32;
  bool meta_init = false;
};

/// Random initial parameters: tables uniform in +-1e-4, He-uniform MLP.
std::vector<float> init_params(const ModelSpec& spec, std::uint64_t seed);
Model init_model(const ModelSpec& spec, const Volume& target, std::uint64_t seed);

/// Forward/backward through encoder and MLP for one batch, templated on the
/// arithmetic type so the same code path can be checked in double.
template <typename Scalar>
class Network {
 public:
  explicit Network(const ModelSpec& spec);

  const ModelSpec& spec() const noexcept { return spec_; }

  /// coords: 3 x B; out: 1 x B. Caches what backward needs.
  void forward(std::span<const Scalar> params, const Matrix<Scalar>& coords, Matrix<Scalar>& out);

  /// Accumulates d(loss)/d(params) for the last forward call.
  void backward(std::span<const Scalar> params, const Matrix<Scalar>& grad_out, std::span<Scalar> grad_params);

 private:
  ModelSpec spec_;
  std::optional<HashEncoding> hash_;
  HashCache<Scalar> hash_cache_;
  Matrix<Scalar> features_;
  Matrix<Scalar> grad_features_;
  MlpCache<Scalar> mlp_cache_;
};

/// Parameters as the network sees them: binary16-rounded in mixed16.
std::vector<float> effective_params(const Model& model);

/// Raw network output (no clamp) at arbitrary coordinates.
std::vector<float> predict(const Model& model, std::span<const std::array<float, 3>> coords);
float predict(const Model& model, std::array<float, 3> coord);

}  // namespace nvr
