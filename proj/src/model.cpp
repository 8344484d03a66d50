#include "nvr/model.hpp"

#include "nvr/errors.hpp"

namespace nvr {

ModelSpec ModelSpec::hash(const HashConfig& cfg, int hidden_layers, int hidden_width) {
  ModelSpec spec;
  spec.encoder = cfg;
  spec.mlp = MlpConfig{cfg.output_width(), hidden_layers, hidden_width, 1};
  return spec;
}

ModelSpec ModelSpec::baseline(const BaselineEncoding& enc, int hidden_layers, int hidden_width) {
  ModelSpec spec;
  spec.encoder = enc;
  spec.mlp = MlpConfig{enc.output_width(), hidden_layers, hidden_width, 1};
  return spec;
}

int ModelSpec::encoder_width() const {
  return std::visit([](const auto& e) { return e.output_width(); }, encoder);
}

std::size_t ModelSpec::encoder_param_count() const {
  if (const auto* h = std::get_if<HashConfig>(&encoder)) return h->param_count();
  return 0;
}

void ModelSpec::validate() const {
  std::visit([](const auto& e) { e.validate(); }, encoder);
  mlp.validate();
  if (mlp.input_width != encoder_width()) {
    throw InputError("MLP input width " + std::to_string(mlp.input_width) + " != encoder width " +
                     std::to_string(encoder_width()));
  }
  if (mlp.output_width != 1) throw InputError("network must produce a single intensity");
}

std::vector<float> init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<float> params(spec.param_count());
  std::span<float> all(params);
  const std::size_t enc = spec.encoder_param_count();
  if (const auto* h = std::get_if<HashConfig>(&spec.encoder)) {
    HashEncoding(*h).init_tables(all.first(enc), seed * 2 + 1);
  }
  init_mlp(spec.mlp, seed * 2 + 2, all.subspan(enc));
  return params;
}

Model init_model(const ModelSpec& spec, const Volume& target, std::uint64_t seed) {
  Model m;
  m.spec = spec;
  m.params = init_params(spec, seed);
  m.dims = target.dims;
  m.vmin = target.vmin;
  m.vmax = target.vmax;
  m.source_dtype = target.source_dtype;
  return m;
}

template <typename Scalar>
Network<Scalar>::Network(const ModelSpec& spec) : spec_(spec) {
  spec_.validate();
  if (const auto* h = std::get_if<HashConfig>(&spec_.encoder)) hash_.emplace(*h);
}

template <typename Scalar>
void Network<Scalar>::forward(std::span<const Scalar> params, const Matrix<Scalar>& coords, Matrix<Scalar>& out) {
  if (params.size() != spec_.param_count()) throw InputError("parameter vector does not match model shape");
  const std::size_t enc = spec_.encoder_param_count();
  if (hash_) {
    hash_->forward(params.first(enc), coords, features_, hash_cache_);
  } else {
    encode_baseline(std::get<BaselineEncoding>(spec_.encoder), coords, features_);
  }
  mlp_forward(spec_.mlp, params.subspan(enc), features_, mlp_cache_, out);
}

template <typename Scalar>
void Network<Scalar>::backward(std::span<const Scalar> params, const Matrix<Scalar>& grad_out,
                               std::span<Scalar> grad_params) {
  const std::size_t enc = spec_.encoder_param_count();
  mlp_backward(spec_.mlp, params.subspan(enc), mlp_cache_, grad_out, grad_params.subspan(enc),
               hash_ ? &grad_features_ : nullptr);
  if (hash_) hash_->backward(hash_cache_, grad_features_, grad_params.first(enc));
}

template class Network<float>;
template class Network<double>;

std::vector<float> effective_params(const Model& model) {
  std::vector<float> p = model.params;
  if (model.precision == Precision::kMixed16) half_roundtrip(p, p);
  return p;
}

std::vector<float> predict(const Model& model, std::span<const std::array<float, 3>> coords) {
  Network<float> net(model.spec);
  const auto params = effective_params(model);
  std::vector<float> result(coords.size());
  constexpr std::size_t kChunk = 1 << 14;
  Matrix<float> x;
  Matrix<float> y;
  for (std::size_t begin = 0; begin < coords.size(); begin += kChunk) {
    const std::size_t n = std::min(kChunk, coords.size() - begin);
    x.resize(3, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (int a = 0; a < 3; ++a) x(a, static_cast<Eigen::Index>(i)) = coords[begin + i][static_cast<std::size_t>(a)];
    }
    net.forward(params, x, y);
    for (std::size_t i = 0; i < n; ++i) result[begin + i] = y(0, static_cast<Eigen::Index>(i));
  }
  return result;
}

float predict(const Model& model, std::array<float, 3> coord) {
  return predict(model, std::span<const std::array<float, 3>>(&coord, 1)).front();
}

}  // namespace nvr
