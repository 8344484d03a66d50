#include "nvr/meta.hpp"

#include <algorithm>
#include <random>

#include "nvr/errors.hpp"

namespace nvr {

std::uint64_t inner_seed(const MetaConfig& cfg, int outer_iteration) {
  // splitmix64 of (seed, iteration)
  std::uint64_t z = cfg.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(outer_iteration) + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void reptile_update(std::span<float> theta, std::span<const float> inner_result, float epsilon) {
  if (theta.size() != inner_result.size()) throw InputError("reptile update size mismatch");
  // Written as a convex combination so eps = 0 and eps = 1 are exact.
  const float keep = 1.0f - epsilon;
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = keep * theta[i] + epsilon * inner_result[i];
}

std::vector<float> reptile(std::span<const Volume> tasks, const ModelSpec& spec, const MetaConfig& cfg,
                           std::vector<float> theta, const InnerObserver& observer) {
  if (tasks.empty()) throw InputError("meta-learning needs at least one task");
  if (cfg.outer_iterations < 1) throw InputError("outer iterations must be >= 1");
  if (!(cfg.epsilon >= 0.0f && cfg.epsilon <= 1.0f)) throw InputError("epsilon must lie in [0, 1]");
  spec.validate();
  if (theta.empty()) theta = init_params(spec, cfg.seed);
  if (theta.size() != spec.param_count()) throw InputError("initial theta does not match the model shape");

  std::mt19937_64 task_rng(cfg.seed ^ 0x5DEECE66Dull);
  for (int it = 0; it < cfg.outer_iterations; ++it) {
    const auto pick = static_cast<std::size_t>(
        (static_cast<unsigned __int128>(task_rng()) * tasks.size()) >> 64);
    const Volume& task = tasks[pick];

    TrainConfig inner = cfg.inner;
    inner.seed = inner_seed(cfg, it);
    inner.track_psnr = false;
    Trainer trainer(task, spec, theta, inner);
    const std::size_t k = cfg.inner_steps > 0 ? cfg.inner_steps : trainer.steps_per_epoch();
    for (std::size_t s = 0; s < k; ++s) trainer.step();

    float eps = cfg.epsilon;
    if (cfg.anneal_epsilon) {
      eps *= 1.0f - static_cast<float>(it) / static_cast<float>(cfg.outer_iterations);
    }
    reptile_update(theta, trainer.store().master(), eps);
    if (observer) observer(it, pick, trainer);
  }
  return theta;
}

std::vector<TransferPoint> evaluate_transfer(std::span<const float> meta_init, const Volume& held_out,
                                             const ModelSpec& spec, const TrainConfig& cfg,
                                             std::span<const std::uint64_t> checkpoints,
                                             std::uint64_t random_seed) {
  if (meta_init.size() != spec.param_count()) throw InputError("meta init does not match the model shape");
  std::vector<std::uint64_t> marks(checkpoints.begin(), checkpoints.end());
  std::sort(marks.begin(), marks.end());

  TrainConfig run_cfg = cfg;
  run_cfg.track_psnr = false;
  run_cfg.psnr_subsample = 0;  // full volume

  const auto curve = [&](std::vector<float> init) {
    Trainer trainer(held_out, spec, std::move(init), run_cfg);
    std::vector<double> out;
    for (const auto mark : marks) {
      while (trainer.iterations() < mark) trainer.step();
      out.push_back(trainer.current_psnr());
    }
    return out;
  };

  const auto meta = curve(std::vector<float>(meta_init.begin(), meta_init.end()));
  const auto random = curve(init_params(spec, random_seed));
  std::vector<TransferPoint> table;
  for (std::size_t i = 0; i < marks.size(); ++i) table.push_back({marks[i], meta[i], random[i]});
  return table;
}

}  // namespace nvr
