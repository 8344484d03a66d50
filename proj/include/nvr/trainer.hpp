#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nvr/model.hpp"
#include "nvr/optim.hpp"
#include "nvr/volume.hpp"

namespace nvr {

// Gradient-loss weight used when the gradient term is switched on without an
// explicit weight.
inline constexpr float kDefaultGradLambda = 0.05f;

struct TrainConfig {
  int epochs = 50;
  std::size_t batch_size = std::size_t{1} << 14;
  std::uint64_t seed = 0;
  // Weight of the central-difference gradient MSE term; 0 trains on L2 only.
  float lambda_grad = 0.0f;
  Precision precision = Precision::kFull32;
  AdamConfig adam;
  // Per-epoch PSNR is measured on at most this many voxels (strided subset).
  std::size_t psnr_subsample = std::size_t{64} * 64 * 64;
  bool track_psnr = true;
};

struct EpochRecord {
  int epoch = 0;
  std::uint64_t iterations = 0;  // cumulative gradient updates
  double loss = 0.0;             // mean total loss over the epoch's samples
  double psnr = 0.0;
  double seconds = 0.0;          // cumulative optimization wall time
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::uint64_t iterations = 0;
  double seconds = 0.0;

  /// `epoch,iterations,loss,psnr,seconds` with a header row.
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

/// One epoch's visiting order: a seeded permutation of all voxel indices cut
/// into consecutive batches; the last batch may be short.
class EpochPlan {
 public:
  EpochPlan(std::vector<std::uint32_t> order, std::size_t batch_size);

  std::size_t batch_count() const noexcept { return (order_.size() + batch_size_ - 1) / batch_size_; }
  std::span<const std::uint32_t> batch(std::size_t i) const;
  std::span<const std::uint32_t> order() const noexcept { return order_; }

 private:
  std::vector<std::uint32_t> order_;
  std::size_t batch_size_;
};

EpochPlan sample_epoch(const Volume& v, std::size_t batch_size, std::mt19937_64& rng);

/// Mean squared error over the batch; grad (if non-empty) receives
/// 2 (pred - target) / B.
template <typename Scalar>
double loss_l2(std::span<const Scalar> pred, std::span<const Scalar> target, std::span<Scalar> grad);

/// Per-axis finite difference in voxel units: (v[i+1] - v[i-1]) / 2 inside,
/// one-sided first difference on the boundary.
std::array<double, 3> central_gradient(const Volume& v, std::array<std::uint32_t, 3> idx);

struct BatchLoss {
  double total = 0.0;
  double l2 = 0.0;
  double gradmse = 0.0;  // zero when lambda is 0
};

/// Total objective l2 + lambda * gradmse for a batch of voxels and its exact
/// gradient. With lambda > 0 the model is also evaluated at each voxel's six
/// index-space neighbours and the predicted central differences are compared
/// with the ground-truth ones.
template <typename Scalar>
class LossEvaluator {
 public:
  LossEvaluator(const ModelSpec& spec, const Volume& volume, float lambda_grad);

  /// Adds d(total)/d(params) into grad (caller zeroes it).
  BatchLoss evaluate(std::span<const Scalar> params, std::span<const std::uint32_t> voxels, std::span<Scalar> grad);

 private:
  const Volume& volume_;
  Scalar lambda_;
  Network<Scalar> net_;
  std::array<std::vector<Scalar>, 3> axis_coord_;
  Matrix<Scalar> coords_;
  Matrix<Scalar> out_;
  Matrix<Scalar> grad_out_;
};

/// Overfits one model to one volume, one batch per step.
class Trainer {
 public:
  Trainer(const Volume& volume, const ModelSpec& spec, std::vector<float> initial, const TrainConfig& cfg);

  /// One forward/backward/Adam update on the next batch; returns the batch's
  /// total loss. Throws NumericalError on a non-finite loss.
  double step();

  /// Steps to the end of the current epoch and appends an EpochRecord.
  const EpochRecord& run_epoch();

  /// Runs the remaining epochs up to cfg.epochs and finalizes the totals.
  TrainReport train();

  std::uint64_t iterations() const noexcept { return iterations_; }
  int epochs_done() const noexcept { return epoch_; }
  std::size_t steps_per_epoch() const noexcept;
  const AdamState& adam() const noexcept { return adam_; }
  const ParameterStore& store() const noexcept { return store_; }
  std::span<const std::uint32_t> last_batch() const noexcept { return last_batch_; }
  const TrainReport& report() const noexcept { return report_; }

  /// PSNR of the clamped current prediction on the evaluation subset.
  double current_psnr();

  /// Snapshot holding the 32-bit master parameters.
  Model model() const;

 private:
  void begin_epoch();

  const Volume& volume_;
  ModelSpec spec_;
  TrainConfig cfg_;
  LossEvaluator<float> loss_;
  Network<float> eval_net_;
  ParameterStore store_;
  AdamState adam_;
  std::vector<ParamGroup> groups_;
  std::vector<float> grad_;
  std::mt19937_64 rng_;
  std::optional<EpochPlan> plan_;
  std::size_t cursor_ = 0;
  std::size_t epoch_samples_ = 0;
  double epoch_loss_sum_ = 0.0;
  std::uint64_t iterations_ = 0;
  int epoch_ = 0;
  double seconds_ = 0.0;
  std::vector<std::uint32_t> last_batch_;
  std::vector<std::uint32_t> eval_voxels_;
  TrainReport report_;
};

/// Trains from `initial` (or a fresh init from cfg.seed when empty).
struct TrainResult {
  Model model;
  TrainReport report;
};
TrainResult train(const Volume& v, const ModelSpec& spec, const TrainConfig& cfg,
                  std::vector<float> initial = {});

/// Evaluates the model at every voxel coordinate of `dims`, clamped to [0,1].
Volume decode_volume(const Model& model, Dims dims);

}  // namespace nvr
