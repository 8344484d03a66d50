#include "nvr/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

#include "nvr/errors.hpp"
#include "nvr/trainer.hpp"

namespace nvr {

namespace {

void require_same_dims(const Volume& a, const Volume& b) {
  if (!(a.dims == b.dims)) {
    throw InputError("volume dims differ: " + to_string(a.dims) + " vs " + to_string(b.dims));
  }
}

// Inclusive-prefix 3D summed-volume table with a zero border:
// table(i+1, j+1, k+1) = sum over [0..i]x[0..j]x[0..k].
class SummedVolume {
 public:
  template <typename F>
  SummedVolume(Dims d, F&& value) : nx_(d.nx + 1), ny_(d.ny + 1), nz_(d.nz + 1), t_(nx_ * ny_ * nz_, 0.0) {
    for (std::size_t k = 1; k < nz_; ++k) {
      for (std::size_t j = 1; j < ny_; ++j) {
        for (std::size_t i = 1; i < nx_; ++i) {
          t_[at(i, j, k)] = value(i - 1, j - 1, k - 1) + t_[at(i - 1, j, k)] + t_[at(i, j - 1, k)] +
                            t_[at(i, j, k - 1)] - t_[at(i - 1, j - 1, k)] - t_[at(i - 1, j, k - 1)] -
                            t_[at(i, j - 1, k - 1)] + t_[at(i - 1, j - 1, k - 1)];
        }
      }
    }
  }

  // Sum over the box [i, i+w) x [j, j+w) x [k, k+w).
  double box(std::size_t i, std::size_t j, std::size_t k, std::size_t w) const {
    const std::size_t i1 = i + w, j1 = j + w, k1 = k + w;
    return t_[at(i1, j1, k1)] - t_[at(i, j1, k1)] - t_[at(i1, j, k1)] - t_[at(i1, j1, k)] + t_[at(i, j, k1)] +
           t_[at(i, j1, k)] + t_[at(i1, j, k)] - t_[at(i, j, k)];
  }

 private:
  std::size_t at(std::size_t i, std::size_t j, std::size_t k) const { return (k * ny_ + j) * nx_ + i; }
  std::size_t nx_, ny_, nz_;
  std::vector<double> t_;
};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string general(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return kInfinitePsnr;
  return -10.0 * std::log10(mse);
}

double mse(const Volume& a, const Volume& b) {
  require_same_dims(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.data.size());
}

double psnr(const Volume& a, const Volume& b) { return psnr_from_mse(mse(a, b)); }

double ssim3d(const Volume& a, const Volume& b, const SsimOptions& opts) {
  require_same_dims(a, b);
  const auto w = static_cast<std::uint32_t>(opts.window);
  if (opts.window < 1 || a.dims.nx < w || a.dims.ny < w || a.dims.nz < w) {
    throw InputError("volume " + to_string(a.dims) + " is smaller than the SSIM window " +
                     std::to_string(opts.window));
  }
  const auto va = [&](std::size_t i, std::size_t j, std::size_t k) {
    return static_cast<double>(a.at(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                                    static_cast<std::uint32_t>(k)));
  };
  const auto vb = [&](std::size_t i, std::size_t j, std::size_t k) {
    return static_cast<double>(b.at(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                                    static_cast<std::uint32_t>(k)));
  };
  const SummedVolume sa(a.dims, va);
  const SummedVolume sb(a.dims, vb);
  const SummedVolume saa(a.dims, [&](auto i, auto j, auto k) { return va(i, j, k) * va(i, j, k); });
  const SummedVolume sbb(a.dims, [&](auto i, auto j, auto k) { return vb(i, j, k) * vb(i, j, k); });
  const SummedVolume sab(a.dims, [&](auto i, auto j, auto k) { return va(i, j, k) * vb(i, j, k); });

  const double n = static_cast<double>(w) * w * w;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k + w <= a.dims.nz; ++k) {
    for (std::size_t j = 0; j + w <= a.dims.ny; ++j) {
      for (std::size_t i = 0; i + w <= a.dims.nx; ++i) {
        const double mu_a = sa.box(i, j, k, w) / n;
        const double mu_b = sb.box(i, j, k, w) / n;
        // population moments; clamp tiny negative round-off
        const double var_a = std::max(0.0, saa.box(i, j, k, w) / n - mu_a * mu_a);
        const double var_b = std::max(0.0, sbb.box(i, j, k, w) / n - mu_b * mu_b);
        const double cov = sab.box(i, j, k, w) / n - mu_a * mu_b;
        const double s = ((2.0 * mu_a * mu_b + opts.c1) * (2.0 * cov + opts.c2)) /
                         ((mu_a * mu_a + mu_b * mu_b + opts.c1) * (var_a + var_b + opts.c2));
        total += s;
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

double compression_ratio(Dims dims, std::uint64_t model_bytes) {
  if (model_bytes == 0) throw InputError("model size must be > 0 bytes");
  return static_cast<double>(ground_truth_bytes(dims)) / static_cast<double>(model_bytes);
}

double compression_ratio(const Volume& v, std::uint64_t model_bytes) { return compression_ratio(v.dims, model_bytes); }

double gradient_mse(const Volume& a, const Volume& b) {
  require_same_dims(a, b);
  double sum = 0.0;
  for (std::size_t flat = 0; flat < a.data.size(); ++flat) {
    const auto idx = a.unravel(flat);
    const auto ga = central_gradient(a, idx);
    const auto gb = central_gradient(b, idx);
    for (int c = 0; c < 3; ++c) {
      const double d = ga[static_cast<std::size_t>(c)] - gb[static_cast<std::size_t>(c)];
      sum += d * d;
    }
  }
  return sum / (3.0 * static_cast<double>(a.data.size()));
}

QualityReport evaluate_quality(const Volume& truth, const Volume& decoded, std::uint64_t model_bytes,
                               double time_to_compress) {
  QualityReport r;
  r.psnr = psnr(truth, decoded);
  const int window = static_cast<int>(std::min<std::uint32_t>(
      7, std::min({truth.dims.nx, truth.dims.ny, truth.dims.nz})));
  r.ssim = ssim3d(truth, decoded, SsimOptions{window});
  r.compression_ratio = compression_ratio(truth, model_bytes);
  r.grad_mse = gradient_mse(truth, decoded);
  r.time_to_compress = time_to_compress;
  r.model_bytes = model_bytes;
  return r;
}

std::string format_psnr(double db) {
  if (std::isinf(db) || db > kPsnrTableCap) return fixed(kPsnrTableCap, 2);
  return fixed(db, 2);
}

std::string format_table(const QualityReport& r) {
  std::ostringstream out;
  const auto row = [&](const char* key, const std::string& value) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-18s %s\n", key, value.c_str());
    out << buf;
  };
  row("PSNR (dB)", format_psnr(r.psnr) + (std::isinf(r.psnr) ? " (identical)" : ""));
  row("SSIM", fixed(r.ssim, 4));
  row("CR", fixed(r.compression_ratio, 1) + ":1");
  row("grad MSE", general(r.grad_mse));
  row("TC (s)", fixed(r.time_to_compress, 2));
  row("model bytes", std::to_string(r.model_bytes));
  row("PSNR peak", "1.0 (normalized intensities)");
  return out.str();
}

std::string format_key_values(const QualityReport& r) {
  std::ostringstream out;
  out << "psnr=" << general(r.psnr) << '\n'
      << "ssim=" << general(r.ssim) << '\n'
      << "compression_ratio=" << general(r.compression_ratio) << '\n'
      << "grad_mse=" << general(r.grad_mse) << '\n'
      << "time_to_compress=" << general(r.time_to_compress) << '\n'
      << "model_bytes=" << r.model_bytes << '\n'
      << "psnr_peak=normalized\n";
  return out.str();
}

}  // namespace nvr
