#pragma once

#include <cstdint>
#include <vector>

#include "nvr/volume.hpp"

namespace nvr {

/// Seeded test fields: a mixture of isotropic Gaussian blobs plus
/// band-limited noise built from random plane waves.
struct SyntheticOptions {
  Dims dims{64, 64, 64};
  int blob_count = 3;
  double sigma_min = 0.08;
  double sigma_max = 0.20;
  // Noise is a sum of `noise_waves` cosines with wave numbers (cycles per
  // unit length) drawn uniformly in [noise_freq_min, noise_freq_max].
  double noise_amplitude = 0.0;
  int noise_waves = 24;
  double noise_freq_min = 2.0;
  double noise_freq_max = 8.0;
  std::uint64_t seed = 0;
};

Volume make_blob_volume(const SyntheticOptions& opts);

/// Family of blob mixtures on one grid. A five-blob layout is drawn from
/// `seed`; member i keeps the first 2 + i % 4 blobs and jitters their
/// positions, widths and brightness with seed `seed * 1000 + i`.
std::vector<Volume> make_blob_family(int count, Dims dims, std::uint64_t seed, double noise_amplitude = 0.0);

}  // namespace nvr
