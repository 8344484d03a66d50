#include "nvr/cli/experiments.hpp"

#include <cmath>
#include <cstdio>

#include "nvr/codec.hpp"
#include "nvr/errors.hpp"
#include "nvr/metrics.hpp"

namespace nvr::cli {

int solve_baseline_width(const BaselineEncoding& enc, int hidden_layers, std::size_t target, double tolerance) {
  if (hidden_layers < 1) throw InputError("baseline needs at least one hidden layer");
  const auto count = [&](int w) { return ModelSpec::baseline(enc, hidden_layers, w).param_count(); };
  // The count is monotone in the width, so bisect for the first width at or
  // above the target and compare it with its predecessor.
  int lo = 1;
  int hi = 1;
  while (count(hi) < target) {
    hi *= 2;
    if (hi > (1 << 20)) throw InputError("parameter budget out of reach");
  }
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (count(mid) < target) lo = mid + 1; else hi = mid;
  }
  int best = lo;
  const auto miss = [&](int w) {
    return std::abs(static_cast<double>(count(w)) - static_cast<double>(target));
  };
  if (lo > 1 && miss(lo - 1) <= miss(lo)) best = lo - 1;
  if (miss(best) > tolerance * static_cast<double>(target)) {
    throw InputError("no " + std::to_string(hidden_layers) + "-layer " + to_string(enc.scheme) +
                     " network within " + std::to_string(tolerance * 100) + "% of " + std::to_string(target) +
                     " parameters");
  }
  return best;
}

std::vector<std::pair<std::string, ModelSpec>> comparison_specs(const CompareOptions& opts) {
  std::vector<std::pair<std::string, ModelSpec>> specs;
  const auto hash = ModelSpec::hash(opts.hash, opts.hash_hidden_layers, opts.hash_hidden_width);
  hash.validate();
  specs.emplace_back("hash", hash);
  for (auto scheme : opts.schemes) {
    BaselineEncoding enc = opts.baseline;
    enc.scheme = scheme;
    enc.validate();
    const int width = solve_baseline_width(enc, opts.baseline_layers, hash.param_count(), opts.tolerance);
    specs.emplace_back(to_string(scheme), ModelSpec::baseline(enc, opts.baseline_layers, width));
  }
  return specs;
}

std::vector<CompareRow> compare_encodings(const Volume& v, const CompareOptions& opts, const CompareProgress& progress) {
  std::vector<CompareRow> rows;
  for (const auto& [name, spec] : comparison_specs(opts)) {
    TrainConfig cfg = opts.train;
    cfg.track_psnr = false;
    auto result = train(v, spec, cfg);
    result.model.precision = cfg.precision;
    const Volume decoded = decode_volume(result.model, v.dims);
    SsimOptions so;
    so.window = static_cast<int>(std::min<std::uint32_t>(7, std::min({v.dims.nx, v.dims.ny, v.dims.nz})));

    CompareRow row;
    row.scheme = name;
    row.params = spec.param_count();
    row.hidden_layers = spec.mlp.hidden_layers;
    row.hidden_width = spec.mlp.hidden_width;
    row.psnr = psnr(v, decoded);
    row.ssim = ssim3d(v, decoded, so);
    row.seconds = result.report.seconds;
    row.compression_ratio = compression_ratio(v, serialized_size(spec, cfg.precision));
    if (progress) progress(row);
    rows.push_back(row);
  }
  return rows;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::string out = "scheme,params,hidden_layers,hidden_width,psnr,ssim,seconds,compression_ratio\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%d,%d,%.6f,%.6f,%.3f,%.4f\n", r.scheme.c_str(), r.params, r.hidden_layers,
                  r.hidden_width, r.psnr, r.ssim, r.seconds, r.compression_ratio);
    out += buf;
  }
  return out;
}

}  // namespace nvr::cli
