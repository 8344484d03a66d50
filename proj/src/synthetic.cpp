#include "nvr/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace nvr {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  // 53 random bits -> [0,1)
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

struct Blob {
  double cx, cy, cz, sigma, amplitude;
};

struct Wave {
  double kx, ky, kz, phase, amplitude;
};

std::vector<Wave> draw_waves(std::mt19937_64& rng, const SyntheticOptions& opts) {
  std::vector<Wave> waves;
  if (opts.noise_amplitude <= 0.0) return waves;
  waves.resize(static_cast<std::size_t>(opts.noise_waves));
  const double per_wave = opts.noise_amplitude / std::sqrt(static_cast<double>(waves.size()));
  for (auto& w : waves) {
    // Direction uniform on the sphere, magnitude in the pass band.
    const double z = uniform(rng, -1.0, 1.0);
    const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double r = std::sqrt(1.0 - z * z);
    const double f = uniform(rng, opts.noise_freq_min, opts.noise_freq_max) * 2.0 * std::numbers::pi;
    w.kx = f * r * std::cos(phi);
    w.ky = f * r * std::sin(phi);
    w.kz = f * z;
    w.phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    w.amplitude = per_wave;
  }
  return waves;
}

Volume render(Dims d, const std::vector<Blob>& blobs, const std::vector<Wave>& waves) {
  std::vector<double> raw(d.count());
  std::size_t n = 0;
  for (std::uint32_t k = 0; k < d.nz; ++k) {
    const double z = static_cast<double>(k) / (d.nz - 1);
    for (std::uint32_t j = 0; j < d.ny; ++j) {
      const double y = static_cast<double>(j) / (d.ny - 1);
      for (std::uint32_t i = 0; i < d.nx; ++i) {
        const double x = static_cast<double>(i) / (d.nx - 1);
        double v = 0.0;
        for (const auto& b : blobs) {
          const double r2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy) + (z - b.cz) * (z - b.cz);
          v += b.amplitude * std::exp(-r2 / (2.0 * b.sigma * b.sigma));
        }
        for (const auto& w : waves) {
          v += w.amplitude * std::cos(w.kx * x + w.ky * y + w.kz * z + w.phase);
        }
        raw[n++] = v;
      }
    }
  }
  return normalize(d, raw, ScalarDtype{DtypeKind::kF32, Endian::kLittle});
}

}  // namespace

Volume make_blob_volume(const SyntheticOptions& opts) {
  opts.dims.validate();
  std::mt19937_64 rng(opts.seed);

  std::vector<Blob> blobs(static_cast<std::size_t>(opts.blob_count));
  for (auto& b : blobs) {
    b.cx = uniform(rng, 0.2, 0.8);
    b.cy = uniform(rng, 0.2, 0.8);
    b.cz = uniform(rng, 0.2, 0.8);
    b.sigma = uniform(rng, opts.sigma_min, opts.sigma_max);
    b.amplitude = uniform(rng, 0.5, 1.0);
  }

  return render(opts.dims, blobs, draw_waves(rng, opts));
}

std::vector<Volume> make_blob_family(int count, Dims dims, std::uint64_t seed, double noise_amplitude) {
  dims.validate();
  // Members share a layout, the way scans from one domain share anatomy:
  // five template blobs, of which member i keeps the first 2 + i % 4, each
  // with its own position jitter, width and brightness.
  std::mt19937_64 rng(seed);
  std::vector<Blob> layout(5);
  for (auto& b : layout) {
    b.cx = uniform(rng, 0.25, 0.75);
    b.cy = uniform(rng, 0.25, 0.75);
    b.cz = uniform(rng, 0.25, 0.75);
    b.sigma = uniform(rng, 0.08, 0.18);
    b.amplitude = uniform(rng, 0.5, 1.0);
  }
  std::vector<Volume> family;
  family.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 member(seed * 1000 + static_cast<std::uint64_t>(i));
    std::vector<Blob> blobs(layout.begin(), layout.begin() + 2 + i % 4);
    for (auto& b : blobs) {
      b.cx += uniform(member, -0.06, 0.06);
      b.cy += uniform(member, -0.06, 0.06);
      b.cz += uniform(member, -0.06, 0.06);
      b.sigma *= uniform(member, 0.85, 1.15);
      b.amplitude *= uniform(member, 0.8, 1.2);
    }
    SyntheticOptions noise;
    noise.noise_amplitude = noise_amplitude;
    family.push_back(render(dims, blobs, draw_waves(member, noise)));
  }
  return family;
}

}  // namespace nvr
