#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nvr/model.hpp"
#include "nvr/trainer.hpp"
#include "nvr/volume.hpp"

namespace nvr::cli {

/// Hidden width for a baseline MLP of `hidden_layers` layers whose total
/// parameter count is closest to `target`. Throws InputError when even the
/// best width misses the target by more than `tolerance` (relative).
int solve_baseline_width(const BaselineEncoding& enc, int hidden_layers, std::size_t target, double tolerance = 0.05);

struct CompareOptions {
  HashConfig hash;
  int hash_hidden_layers = 2;
  int hash_hidden_width = 64;
  int baseline_layers = 12;
  BaselineEncoding baseline;  // scheme field ignored; carries M, k, sigma
  std::vector<BaselineScheme> schemes{BaselineScheme::kFrequency, BaselineScheme::kTriangle,
                                      BaselineScheme::kOneBlob, BaselineScheme::kIdentity};
  double tolerance = 0.05;
  TrainConfig train;
};

struct CompareRow {
  std::string scheme;
  std::size_t params = 0;
  int hidden_layers = 0;
  int hidden_width = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double seconds = 0.0;  // optimization wall time
  double compression_ratio = 0.0;
};

/// The matched-budget model set: hash first, then one baseline per scheme.
std::vector<std::pair<std::string, ModelSpec>> comparison_specs(const CompareOptions& opts);

using CompareProgress = std::function<void(const CompareRow&)>;

/// Trains every scheme on `v` with the same data order and seed and scores
/// the full decode.
std::vector<CompareRow> compare_encodings(const Volume& v, const CompareOptions& opts,
                                          const CompareProgress& progress = {});

/// `scheme,params,hidden_layers,hidden_width,psnr,ssim,seconds,compression_ratio`
std::string compare_csv(const std::vector<CompareRow>& rows);

}  // namespace nvr::cli
