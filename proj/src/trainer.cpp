#include "nvr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nvr/errors.hpp"
#include "nvr/metrics.hpp"

namespace nvr {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

// Stencil endpoints for one axis: (lo, hi) clipped to the grid.
inline std::pair<std::uint32_t, std::uint32_t> stencil(std::uint32_t i, std::uint32_t n) {
  return {i == 0 ? 0u : i - 1, i + 1 >= n ? n - 1 : i + 1};
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string TrainReport::to_csv() const {
  std::ostringstream out;
  out << "epoch,iterations,loss,psnr,seconds\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.iterations << ',' << fmt(e.loss) << ',' << fmt(e.psnr) << ',' << fmt(e.seconds)
        << '\n';
  }
  return out.str();
}

void TrainReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << to_csv();
}

EpochPlan::EpochPlan(std::vector<std::uint32_t> order, std::size_t batch_size)
    : order_(std::move(order)), batch_size_(batch_size) {
  if (batch_size_ == 0) throw InputError("batch size must be >= 1");
}

std::span<const std::uint32_t> EpochPlan::batch(std::size_t i) const {
  const std::size_t begin = i * batch_size_;
  return std::span<const std::uint32_t>(order_).subspan(begin, std::min(batch_size_, order_.size() - begin));
}

EpochPlan sample_epoch(const Volume& v, std::size_t batch_size, std::mt19937_64& rng) {
  const std::size_t n = v.data.size();
  if (batch_size == 0) throw InputError("batch size must be >= 1");
  if (n > std::numeric_limits<std::uint32_t>::max()) throw InputError("volume too large for 32-bit voxel indices");
  std::vector<std::uint32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[bounded(rng, i)]);
  }
  return EpochPlan(std::move(order), std::min(batch_size, std::max<std::size_t>(n, 1)));
}

template <typename Scalar>
double loss_l2(std::span<const Scalar> pred, std::span<const Scalar> target, std::span<Scalar> grad) {
  if (pred.size() != target.size()) throw InputError("prediction and target sizes differ");
  const double inv_b = 1.0 / static_cast<double>(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    sum += d * d;
    if (!grad.empty()) grad[i] = static_cast<Scalar>(2.0 * d * inv_b);
  }
  return sum * inv_b;
}

template double loss_l2<float>(std::span<const float>, std::span<const float>, std::span<float>);
template double loss_l2<double>(std::span<const double>, std::span<const double>, std::span<double>);

std::array<double, 3> central_gradient(const Volume& v, std::array<std::uint32_t, 3> idx) {
  std::array<double, 3> g{};
  for (int a = 0; a < 3; ++a) {
    const auto [lo, hi] = stencil(idx[static_cast<std::size_t>(a)], v.dims[a]);
    auto lo_idx = idx;
    auto hi_idx = idx;
    lo_idx[static_cast<std::size_t>(a)] = lo;
    hi_idx[static_cast<std::size_t>(a)] = hi;
    g[static_cast<std::size_t>(a)] =
        (static_cast<double>(v.at(hi_idx[0], hi_idx[1], hi_idx[2])) - v.at(lo_idx[0], lo_idx[1], lo_idx[2])) /
        static_cast<double>(hi - lo);
  }
  return g;
}

// ---------------------------------------------------------------------------

template <typename Scalar>
LossEvaluator<Scalar>::LossEvaluator(const ModelSpec& spec, const Volume& volume, float lambda_grad)
    : volume_(volume), lambda_(static_cast<Scalar>(lambda_grad)), net_(spec) {
  if (lambda_grad < 0.0f) throw InputError("gradient loss weight must be >= 0");
  for (int a = 0; a < 3; ++a) {
    const std::uint32_t n = volume.dims[a];
    auto& axis = axis_coord_[static_cast<std::size_t>(a)];
    axis.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) axis[i] = static_cast<Scalar>(static_cast<double>(i) / (n - 1));
  }
}

template <typename Scalar>
BatchLoss LossEvaluator<Scalar>::evaluate(std::span<const Scalar> params, std::span<const std::uint32_t> voxels,
                                          std::span<Scalar> grad) {
  const auto batch = static_cast<Eigen::Index>(voxels.size());
  const bool with_grad_term = lambda_ > Scalar(0);
  const Eigen::Index cols = with_grad_term ? 7 * batch : batch;
  const Dims dims = volume_.dims;

  // Columns [0, B): the voxels. With the gradient term, columns B + 6b + 2a
  // and B + 6b + 2a + 1 hold the lo/hi stencil points of voxel b on axis a.
  coords_.resize(3, cols);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto idx = volume_.unravel(voxels[static_cast<std::size_t>(b)]);
    for (int a = 0; a < 3; ++a) {
      coords_(a, b) = axis_coord_[static_cast<std::size_t>(a)][idx[static_cast<std::size_t>(a)]];
    }
    if (!with_grad_term) continue;
    for (int a = 0; a < 3; ++a) {
      const auto [lo, hi] = stencil(idx[static_cast<std::size_t>(a)], dims[a]);
      const Eigen::Index c = batch + 6 * b + 2 * a;
      coords_.col(c) = coords_.col(b);
      coords_.col(c + 1) = coords_.col(b);
      coords_(a, c) = axis_coord_[static_cast<std::size_t>(a)][lo];
      coords_(a, c + 1) = axis_coord_[static_cast<std::size_t>(a)][hi];
    }
  }

  net_.forward(params, coords_, out_);
  grad_out_.setZero(1, cols);

  BatchLoss result;
  const double inv_b = 1.0 / static_cast<double>(batch);
  double l2_sum = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double d = static_cast<double>(out_(0, b)) - volume_.data[voxels[static_cast<std::size_t>(b)]];
    l2_sum += d * d;
    grad_out_(0, b) = static_cast<Scalar>(2.0 * d * inv_b);
  }
  result.l2 = l2_sum * inv_b;

  if (with_grad_term) {
    const double lambda = static_cast<double>(lambda_);
    const double inv_components = 1.0 / (3.0 * static_cast<double>(batch));
    double g_sum = 0.0;
    for (Eigen::Index b = 0; b < batch; ++b) {
      const auto idx = volume_.unravel(voxels[static_cast<std::size_t>(b)]);
      for (int a = 0; a < 3; ++a) {
        const auto [lo, hi] = stencil(idx[static_cast<std::size_t>(a)], dims[a]);
        auto lo_idx = idx;
        auto hi_idx = idx;
        lo_idx[static_cast<std::size_t>(a)] = lo;
        hi_idx[static_cast<std::size_t>(a)] = hi;
        const double span = static_cast<double>(hi - lo);
        const Eigen::Index c = batch + 6 * b + 2 * a;
        const double pred_g = (static_cast<double>(out_(0, c + 1)) - static_cast<double>(out_(0, c))) / span;
        const double true_g = (static_cast<double>(volume_.at(hi_idx[0], hi_idx[1], hi_idx[2])) -
                               volume_.at(lo_idx[0], lo_idx[1], lo_idx[2])) /
                              span;
        const double e = pred_g - true_g;
        g_sum += e * e;
        const double coef = lambda * 2.0 * e * inv_components / span;
        grad_out_(0, c + 1) += static_cast<Scalar>(coef);
        grad_out_(0, c) -= static_cast<Scalar>(coef);
      }
    }
    result.gradmse = g_sum * inv_components;
  }
  result.total = result.l2 + static_cast<double>(lambda_) * result.gradmse;

  net_.backward(params, grad_out_, grad);
  return result;
}

template class LossEvaluator<float>;
template class LossEvaluator<double>;

// ---------------------------------------------------------------------------

Trainer::Trainer(const Volume& volume, const ModelSpec& spec, std::vector<float> initial, const TrainConfig& cfg)
    : volume_(volume),
      spec_(spec),
      cfg_(cfg),
      loss_(spec, volume, cfg.lambda_grad),
      eval_net_(spec),
      store_(std::move(initial), cfg.precision),
      rng_(cfg.seed) {
  if (store_.size() != spec_.param_count()) {
    throw InputError("initial parameter vector has " + std::to_string(store_.size()) + " values, model needs " +
                     std::to_string(spec_.param_count()));
  }
  if (cfg_.batch_size == 0) throw InputError("batch size must be >= 1");
  if (cfg_.epochs < 0) throw InputError("epoch count must be >= 0");
  adam_.reset(store_.size());
  grad_.assign(store_.size(), 0.0f);
  const std::size_t enc = spec_.encoder_param_count();
  if (enc > 0) groups_.push_back({0, enc, cfg_.adam.lr_tables});
  groups_.push_back({enc, store_.size(), cfg_.adam.lr_mlp});

  const std::size_t n = volume_.data.size();
  const std::size_t stride =
      cfg_.psnr_subsample == 0 ? 1 : std::max<std::size_t>(1, (n + cfg_.psnr_subsample - 1) / cfg_.psnr_subsample);
  for (std::size_t i = 0; i < n; i += stride) eval_voxels_.push_back(static_cast<std::uint32_t>(i));
}

std::size_t Trainer::steps_per_epoch() const noexcept {
  const std::size_t n = volume_.data.size();
  const std::size_t b = std::min(cfg_.batch_size, n);
  return (n + b - 1) / b;
}

void Trainer::begin_epoch() {
  plan_.emplace(sample_epoch(volume_, cfg_.batch_size, rng_));
  cursor_ = 0;
  epoch_samples_ = 0;
  epoch_loss_sum_ = 0.0;
}

double Trainer::step() {
  if (!plan_ || cursor_ >= plan_->batch_count()) begin_epoch();
  const auto batch = plan_->batch(cursor_++);
  last_batch_.assign(batch.begin(), batch.end());

  const auto t0 = Clock::now();
  std::fill(grad_.begin(), grad_.end(), 0.0f);
  const BatchLoss l = loss_.evaluate(store_.working(), batch, grad_);
  if (!std::isfinite(l.total)) {
    throw NumericalError("non-finite loss at iteration " + std::to_string(iterations_ + 1) + " (epoch " +
                         std::to_string(epoch_ + 1) + ", l2=" + fmt(l.l2) + ", gradmse=" + fmt(l.gradmse) + ")");
  }
  const float lr_scale = static_cast<float>(std::pow(static_cast<double>(cfg_.adam.lr_decay), epoch_));
  adam_step(store_.master(), grad_, adam_, groups_, cfg_.adam, lr_scale);
  store_.refresh();
  seconds_ += std::chrono::duration<double>(Clock::now() - t0).count();

  ++iterations_;
  epoch_loss_sum_ += l.total * static_cast<double>(batch.size());
  epoch_samples_ += batch.size();
  return l.total;
}

const EpochRecord& Trainer::run_epoch() {
  if (!plan_ || cursor_ >= plan_->batch_count()) begin_epoch();
  while (cursor_ < plan_->batch_count()) step();
  if (epoch_samples_ != volume_.data.size()) {
    throw std::logic_error("epoch visited " + std::to_string(epoch_samples_) + " samples, volume has " +
                           std::to_string(volume_.data.size()));
  }
  ++epoch_;
  EpochRecord rec;
  rec.epoch = epoch_;
  rec.iterations = iterations_;
  rec.loss = epoch_loss_sum_ / static_cast<double>(epoch_samples_);
  rec.psnr = cfg_.track_psnr ? current_psnr() : 0.0;
  rec.seconds = seconds_;
  report_.epochs.push_back(rec);
  report_.iterations = iterations_;
  report_.seconds = seconds_;
  return report_.epochs.back();
}

TrainReport Trainer::train() {
  while (epoch_ < cfg_.epochs) run_epoch();
  report_.iterations = iterations_;
  report_.seconds = seconds_;
  return report_;
}

double Trainer::current_psnr() {
  constexpr std::size_t kChunk = 1 << 14;
  const auto params = store_.working();
  Matrix<float> x;
  Matrix<float> y;
  double sum = 0.0;
  for (std::size_t begin = 0; begin < eval_voxels_.size(); begin += kChunk) {
    const std::size_t n = std::min(kChunk, eval_voxels_.size() - begin);
    x.resize(3, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto idx = volume_.unravel(eval_voxels_[begin + i]);
      for (int a = 0; a < 3; ++a) {
        x(a, static_cast<Eigen::Index>(i)) =
            static_cast<float>(static_cast<double>(idx[static_cast<std::size_t>(a)]) / (volume_.dims[a] - 1));
      }
    }
    eval_net_.forward(params, x, y);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = std::clamp(y(0, static_cast<Eigen::Index>(i)), 0.0f, 1.0f);
      const double d = p - volume_.data[eval_voxels_[begin + i]];
      sum += d * d;
    }
  }
  return psnr_from_mse(sum / static_cast<double>(eval_voxels_.size()));
}

Model Trainer::model() const {
  Model m;
  m.spec = spec_;
  m.params.assign(store_.master().begin(), store_.master().end());
  m.dims = volume_.dims;
  m.vmin = volume_.vmin;
  m.vmax = volume_.vmax;
  m.source_dtype = volume_.source_dtype;
  m.precision = cfg_.precision;
  return m;
}

TrainResult train(const Volume& v, const ModelSpec& spec, const TrainConfig& cfg, std::vector<float> initial) {
  if (initial.empty()) initial = init_params(spec, cfg.seed);
  Trainer trainer(v, spec, std::move(initial), cfg);
  TrainReport report = trainer.train();
  return {trainer.model(), std::move(report)};
}

Volume decode_volume(const Model& model, Dims dims) {
  if (!(dims == model.dims)) {
    throw InputError("decode dims " + to_string(dims) + " do not match model dims " + to_string(model.dims));
  }
  Network<float> net(model.spec);
  const auto params = effective_params(model);
  Volume out;
  out.dims = dims;
  out.vmin = model.vmin;
  out.vmax = model.vmax;
  out.source_dtype = model.source_dtype;
  out.data.resize(dims.count());

  std::array<std::vector<float>, 3> axis;
  for (int a = 0; a < 3; ++a) {
    axis[static_cast<std::size_t>(a)].resize(dims[a]);
    for (std::uint32_t i = 0; i < dims[a]; ++i) {
      axis[static_cast<std::size_t>(a)][i] = static_cast<float>(static_cast<double>(i) / (dims[a] - 1));
    }
  }
  constexpr std::size_t kChunk = 1 << 14;
  Matrix<float> x;
  Matrix<float> y;
  for (std::size_t begin = 0; begin < out.data.size(); begin += kChunk) {
    const std::size_t n = std::min(kChunk, out.data.size() - begin);
    x.resize(3, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto idx = out.unravel(begin + i);
      for (int a = 0; a < 3; ++a) {
        x(a, static_cast<Eigen::Index>(i)) = axis[static_cast<std::size_t>(a)][idx[static_cast<std::size_t>(a)]];
      }
    }
    net.forward(params, x, y);
    for (std::size_t i = 0; i < n; ++i) out.data[begin + i] = std::clamp(y(0, static_cast<Eigen::Index>(i)), 0.0f, 1.0f);
  }
  return out;
}

}  // namespace nvr
