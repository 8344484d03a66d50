#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "nvr/model.hpp"
#include "nvr/trainer.hpp"
#include "nvr/volume.hpp"

namespace nvr {

struct MetaConfig {
  int outer_iterations = 100;
  float epsilon = 0.1f;  // outer step size
  bool anneal_epsilon = false;  // linear decay of epsilon to 0 over the run
  // Inner gradient updates per task; 0 means one full pass over the task.
  std::size_t inner_steps = 0;
  TrainConfig inner;  // batch size, learning rates, precision, lambda
  std::uint64_t seed = 0;
};

/// Seed of the inner run at a given outer iteration (sampler order).
std::uint64_t inner_seed(const MetaConfig& cfg, int outer_iteration);

/// Called after each inner run with the outer iteration, the chosen task and
/// the finished inner trainer.
using InnerObserver = std::function<void(int, std::size_t, const Trainer&)>;

/// Reptile: repeatedly pick a task uniformly at random, run the inner
/// optimizer from theta (fresh Adam state) to get W, and move
/// theta <- theta + eps (W - theta). Starts from `theta` (or a random init
/// from cfg.seed when empty).
std::vector<float> reptile(std::span<const Volume> tasks, const ModelSpec& spec, const MetaConfig& cfg,
                           std::vector<float> theta = {}, const InnerObserver& observer = {});

/// theta + eps (W - theta), coordinatewise.
void reptile_update(std::span<float> theta, std::span<const float> inner_result, float epsilon);

struct TransferPoint {
  std::uint64_t iteration = 0;
  double psnr_meta = 0.0;
  double psnr_random = 0.0;
};

/// Trains the held-out volume twice with identical data order, once from
/// `meta_init` and once from a random init drawn with `random_seed`, and
/// records full-volume PSNR at each iteration checkpoint.
std::vector<TransferPoint> evaluate_transfer(std::span<const float> meta_init, const Volume& held_out,
                                             const ModelSpec& spec, const TrainConfig& cfg,
                                             std::span<const std::uint64_t> checkpoints,
                                             std::uint64_t random_seed);

}  // namespace nvr
