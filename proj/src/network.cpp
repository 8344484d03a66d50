#include "nvr/network.hpp"

#include <cmath>
#include <random>
#include <string>

#include "nvr/errors.hpp"

namespace nvr {

namespace {

template <typename Scalar>
using RowMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

}  // namespace

std::vector<MlpConfig::Layer> MlpConfig::layers() const {
  std::vector<Layer> out;
  std::size_t offset = 0;
  int in = input_width;
  for (int i = 0; i <= hidden_layers; ++i) {
    const int width = i == hidden_layers ? output_width : hidden_width;
    Layer layer{in, width, offset, offset + static_cast<std::size_t>(in) * width};
    offset = layer.bias_offset + static_cast<std::size_t>(width);
    out.push_back(layer);
    in = width;
  }
  return out;
}

std::size_t MlpConfig::param_count() const {
  const auto ls = layers();
  return ls.back().bias_offset + static_cast<std::size_t>(ls.back().out);
}

void MlpConfig::validate() const {
  if (input_width < 1 || hidden_width < 1 || output_width < 1) throw InputError("MLP widths must be >= 1");
  if (hidden_layers < 0) throw InputError("MLP hidden layer count must be >= 0");
}

void init_mlp(const MlpConfig& cfg, std::uint64_t seed, std::span<float> params) {
  if (params.size() != cfg.param_count()) throw InputError("MLP parameter buffer has wrong size");
  std::mt19937_64 rng(seed);
  for (const auto& layer : cfg.layers()) {
    const double bound = std::sqrt(6.0 / layer.in);
    const std::size_t n = static_cast<std::size_t>(layer.in) * layer.out;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      params[layer.weight_offset + i] = static_cast<float>((2.0 * u - 1.0) * bound);
    }
    for (int i = 0; i < layer.out; ++i) params[layer.bias_offset + static_cast<std::size_t>(i)] = 0.0f;
  }
}

template <typename Scalar>
void mlp_forward(const MlpConfig& cfg, std::span<const Scalar> params, const Matrix<Scalar>& input,
                 MlpCache<Scalar>& cache, Matrix<Scalar>& output) {
  if (input.rows() != cfg.input_width) {
    throw InputError("MLP input width " + std::to_string(input.rows()) + " does not match config " +
                     std::to_string(cfg.input_width));
  }
  if (params.size() != cfg.param_count()) throw InputError("MLP parameter buffer has wrong size");
  const auto layers = cfg.layers();
  cache.act.resize(layers.size());
  cache.act[0] = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    // Copied into aligned storage: Eigen peels unaligned heads differently,
    // which would make results depend on where the parameter buffer lives.
    const RowMajor<Scalar> w =
        Eigen::Map<const RowMajor<Scalar>>(params.data() + layer.weight_offset, layer.out, layer.in);
    const Vector<Scalar> bias = Eigen::Map<const Vector<Scalar>>(params.data() + layer.bias_offset, layer.out);
    const bool last = i + 1 == layers.size();
    Matrix<Scalar>& z = last ? output : cache.act[i + 1];
    z.resize(layer.out, input.cols());
    z.noalias() = w * cache.act[i];
    z.colwise() += bias;
    if (!last) z = z.cwiseMax(Scalar(0));
  }
}

template <typename Scalar>
void mlp_backward(const MlpConfig& cfg, std::span<const Scalar> params, MlpCache<Scalar>& cache,
                  const Matrix<Scalar>& grad_output, std::span<Scalar> grad_params, Matrix<Scalar>* grad_input) {
  const auto layers = cfg.layers();
  cache.delta.resize(layers.size());
  // delta[i] holds d(loss)/d(pre-activation of layer i)
  cache.delta.back() = grad_output;
  for (std::size_t i = layers.size(); i-- > 0;) {
    const auto& layer = layers[i];
    const RowMajor<Scalar> w =
        Eigen::Map<const RowMajor<Scalar>>(params.data() + layer.weight_offset, layer.out, layer.in);
    Eigen::Map<RowMajor<Scalar>> gw(grad_params.data() + layer.weight_offset, layer.out, layer.in);
    Eigen::Map<Vector<Scalar>> gb(grad_params.data() + layer.bias_offset, layer.out);
    const Matrix<Scalar>& dz = cache.delta[i];
    const RowMajor<Scalar> dw = dz * cache.act[i].transpose();
    const Vector<Scalar> db = dz.rowwise().sum();
    gw += dw;  // elementwise, so alignment cannot change the result
    gb += db;
    if (i > 0) {
      Matrix<Scalar>& prev = cache.delta[i - 1];
      prev.resize(layer.in, dz.cols());
      prev.noalias() = w.transpose() * dz;
      prev = (cache.act[i].array() > Scalar(0)).select(prev, Scalar(0));
    } else if (grad_input != nullptr) {
      grad_input->resize(layer.in, dz.cols());
      grad_input->noalias() = w.transpose() * dz;
    }
  }
}

template void mlp_forward<float>(const MlpConfig&, std::span<const float>, const Matrix<float>&, MlpCache<float>&,
                                 Matrix<float>&);
template void mlp_forward<double>(const MlpConfig&, std::span<const double>, const Matrix<double>&,
                                  MlpCache<double>&, Matrix<double>&);
template void mlp_backward<float>(const MlpConfig&, std::span<const float>, MlpCache<float>&, const Matrix<float>&,
                                  std::span<float>, Matrix<float>*);
template void mlp_backward<double>(const MlpConfig&, std::span<const double>, MlpCache<double>&,
                                   const Matrix<double>&, std::span<double>, Matrix<double>*);

}  // namespace nvr
