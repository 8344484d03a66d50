#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "nvr/volume.hpp"

namespace nvr {

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();
// Value printed in tables in place of an infinite PSNR.
inline constexpr double kPsnrTableCap = 99.99;

/// -10 log10(mse) with peak 1; +inf when mse is 0.
double psnr_from_mse(double mse);

/// PSNR of two normalized volumes (peak 1.0). Throws InputError on a dims
/// mismatch.
double psnr(const Volume& a, const Volume& b);
double mse(const Volume& a, const Volume& b);

struct SsimOptions {
  int window = 7;  // cubic uniform window edge
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

/// Mean local SSIM over every fully contained window (stride 1).
double ssim3d(const Volume& a, const Volume& b, const SsimOptions& opts = {});

/// ground_truth_bytes(v) / model_bytes.
double compression_ratio(const Volume& v, std::uint64_t model_bytes);
double compression_ratio(Dims dims, std::uint64_t model_bytes);

/// Mean over voxels and axes of the squared difference between the two
/// volumes' central-difference gradients.
double gradient_mse(const Volume& a, const Volume& b);

struct QualityReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double compression_ratio = 0.0;
  double grad_mse = 0.0;
  double time_to_compress = 0.0;  // seconds; 0 when unknown
  std::uint64_t model_bytes = 0;
};

QualityReport evaluate_quality(const Volume& truth, const Volume& decoded, std::uint64_t model_bytes,
                               double time_to_compress = 0.0);

/// Aligned two-column table.
std::string format_table(const QualityReport& r);
/// `key=value` lines, one per field.
std::string format_key_values(const QualityReport& r);
/// PSNR formatted for tables (infinite values capped at 99.99).
std::string format_psnr(double db);

}  // namespace nvr
