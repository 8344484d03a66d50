#include "nvr/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "nvr/errors.hpp"

namespace nvr {

void HashConfig::validate() const {
  if (levels < 1) throw InputError("hash levels must be >= 1");
  if (features < 1) throw InputError("hash features per entry must be >= 1");
  if (table_size < 1) throw InputError("hash table size must be >= 1");
  if (n0 < 1) throw InputError("coarsest resolution must be >= 1");
  if (nmax < n0) throw InputError("finest resolution must be >= coarsest resolution");
  if (levels == 1 && n0 != nmax) throw InputError("a single level requires n0 == nmax");
  if (static_cast<std::uint64_t>(table_size) * static_cast<std::uint64_t>(levels) *
          static_cast<std::uint64_t>(features) > (std::uint64_t{1} << 32)) {
    throw InputError("hash tables exceed 2^32 parameters");
  }
}

double growth_factor(const HashConfig& cfg) {
  if (cfg.n0 == cfg.nmax) return 1.0;
  if (cfg.levels < 2) throw InputError("growth factor needs L >= 2 when n0 != nmax");
  return std::exp((std::log(static_cast<double>(cfg.nmax)) - std::log(static_cast<double>(cfg.n0))) /
                  static_cast<double>(cfg.levels - 1));
}

std::vector<int> level_resolutions(const HashConfig& cfg) {
  cfg.validate();
  const double b = growth_factor(cfg);
  std::vector<int> res(static_cast<std::size_t>(cfg.levels));
  for (int l = 0; l < cfg.levels; ++l) {
    const double exact = static_cast<double>(cfg.n0) * std::pow(b, l);
    // exp/log round trip may land a hair below an exact integer
    res[static_cast<std::size_t>(l)] = static_cast<int>(std::floor(exact * (1.0 + 1e-9)));
  }
  res.front() = cfg.n0;
  return res;
}

CellCorners cell_corners(std::array<double, 3> x, int resolution) {
  CellCorners out;
  std::array<std::uint32_t, 3> base{};
  std::array<double, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    const double s = std::clamp(x[a], 0.0, 1.0) * resolution;
    const double fl = std::floor(s);
    base[a] = static_cast<std::uint32_t>(fl);
    frac[a] = s - fl;
  }
  for (int c = 0; c < 8; ++c) {
    double w = 1.0;
    for (int a = 0; a < 3; ++a) {
      const bool upper = (c >> a) & 1;
      out.corner[c][a] = base[a] + (upper ? 1u : 0u);
      w *= upper ? frac[a] : 1.0 - frac[a];
    }
    out.weight[c] = w;
  }
  return out;
}

HashEncoding::HashEncoding(HashConfig cfg) : cfg_(cfg), resolutions_(level_resolutions(cfg)) {}

template <typename Scalar>
void HashEncoding::forward(std::span<const Scalar> tables, const Matrix<Scalar>& coords, Matrix<Scalar>& features,
                           HashCache<Scalar>& cache) const {
  const auto batch = static_cast<std::size_t>(coords.cols());
  const int levels = cfg_.levels;
  const int width = cfg_.features;
  const std::uint32_t table_size = cfg_.table_size;
  const bool pow2 = (table_size & (table_size - 1)) == 0;
  const std::uint64_t mask = std::uint64_t{table_size} - 1;
  const auto& p = cfg_.primes;

  features.resize(levels * width, static_cast<Eigen::Index>(batch));
  cache.batch = batch;
  cache.offset.resize(batch * static_cast<std::size_t>(levels) * 8);
  cache.weight.resize(cache.offset.size());

  for (std::size_t b = 0; b < batch; ++b) {
    const Scalar* x = coords.col(static_cast<Eigen::Index>(b)).data();
    Scalar* out = features.col(static_cast<Eigen::Index>(b)).data();
    for (int l = 0; l < levels; ++l) {
      const auto res = static_cast<Scalar>(resolutions_[static_cast<std::size_t>(l)]);
      std::uint64_t hx[2], hy[2], hz[2];
      Scalar wx[2], wy[2], wz[2];
      {
        const Scalar s = std::clamp(x[0], Scalar(0), Scalar(1)) * res;
        const Scalar fl = std::floor(s);
        const auto c = static_cast<std::uint64_t>(fl);
        hx[0] = c * p[0];
        hx[1] = (c + 1) * p[0];
        wx[1] = s - fl;
        wx[0] = Scalar(1) - wx[1];
      }
      {
        const Scalar s = std::clamp(x[1], Scalar(0), Scalar(1)) * res;
        const Scalar fl = std::floor(s);
        const auto c = static_cast<std::uint64_t>(fl);
        hy[0] = c * p[1];
        hy[1] = (c + 1) * p[1];
        wy[1] = s - fl;
        wy[0] = Scalar(1) - wy[1];
      }
      {
        const Scalar s = std::clamp(x[2], Scalar(0), Scalar(1)) * res;
        const Scalar fl = std::floor(s);
        const auto c = static_cast<std::uint64_t>(fl);
        hz[0] = c * p[2];
        hz[1] = (c + 1) * p[2];
        wz[1] = s - fl;
        wz[0] = Scalar(1) - wz[1];
      }

      Scalar* feat = out + l * width;
      std::fill(feat, feat + width, Scalar(0));
      const std::size_t slot = (b * static_cast<std::size_t>(levels) + static_cast<std::size_t>(l)) * 8;
      const std::size_t level_base = static_cast<std::size_t>(l) * table_size;
      for (int c = 0; c < 8; ++c) {
        const std::uint64_t h = hx[c & 1] ^ hy[(c >> 1) & 1] ^ hz[c >> 2];
        const std::uint64_t idx = pow2 ? (h & mask) : (h % table_size);
        const Scalar w = wx[c & 1] * wy[(c >> 1) & 1] * wz[c >> 2];
        const auto off = static_cast<std::uint32_t>((level_base + idx) * static_cast<std::size_t>(width));
        cache.offset[slot + static_cast<std::size_t>(c)] = off;
        cache.weight[slot + static_cast<std::size_t>(c)] = w;
        const Scalar* entry = tables.data() + off;
        for (int f = 0; f < width; ++f) feat[f] += w * entry[f];
      }
    }
  }
}

template <typename Scalar>
void HashEncoding::backward(const HashCache<Scalar>& cache, const Matrix<Scalar>& grad_features,
                            std::span<Scalar> grad_tables) const {
  const int levels = cfg_.levels;
  const int width = cfg_.features;
  for (std::size_t b = 0; b < cache.batch; ++b) {
    const Scalar* g = grad_features.col(static_cast<Eigen::Index>(b)).data();
    for (int l = 0; l < levels; ++l) {
      const Scalar* gl = g + l * width;
      const std::size_t slot = (b * static_cast<std::size_t>(levels) + static_cast<std::size_t>(l)) * 8;
      for (int c = 0; c < 8; ++c) {
        const Scalar w = cache.weight[slot + static_cast<std::size_t>(c)];
        if (w == Scalar(0)) continue;
        Scalar* entry = grad_tables.data() + cache.offset[slot + static_cast<std::size_t>(c)];
        for (int f = 0; f < width; ++f) entry[f] += w * gl[f];
      }
    }
  }
}

void HashEncoding::init_tables(std::span<float> tables, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  for (auto& t : tables) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    t = static_cast<float>((2.0 * u - 1.0) * 1e-4);
  }
}

template void HashEncoding::forward<float>(std::span<const float>, const Matrix<float>&, Matrix<float>&,
                                           HashCache<float>&) const;
template void HashEncoding::forward<double>(std::span<const double>, const Matrix<double>&, Matrix<double>&,
                                            HashCache<double>&) const;
template void HashEncoding::backward<float>(const HashCache<float>&, const Matrix<float>&, std::span<float>) const;
template void HashEncoding::backward<double>(const HashCache<double>&, const Matrix<double>&,
                                             std::span<double>) const;

// ---------------------------------------------------------------------------

std::string to_string(BaselineScheme scheme) {
  switch (scheme) {
    case BaselineScheme::kIdentity: return "identity";
    case BaselineScheme::kFrequency: return "frequency";
    case BaselineScheme::kTriangle: return "triangle";
    case BaselineScheme::kOneBlob: return "oneblob";
  }
  return "?";
}

BaselineScheme parse_baseline_scheme(std::string_view name) {
  if (name == "identity") return BaselineScheme::kIdentity;
  if (name == "frequency") return BaselineScheme::kFrequency;
  if (name == "triangle") return BaselineScheme::kTriangle;
  if (name == "oneblob" || name == "one-blob") return BaselineScheme::kOneBlob;
  throw InputError("unknown encoding scheme '" + std::string(name) + "'");
}

int BaselineEncoding::width_per_dim() const noexcept {
  switch (scheme) {
    case BaselineScheme::kIdentity: return 1;
    case BaselineScheme::kFrequency: return 2 * (frequencies + 1);
    case BaselineScheme::kTriangle: return frequencies + 1;
    case BaselineScheme::kOneBlob: return bins;
  }
  return 0;
}

void BaselineEncoding::validate() const {
  switch (scheme) {
    case BaselineScheme::kIdentity: break;
    case BaselineScheme::kFrequency:
    case BaselineScheme::kTriangle:
      if (frequencies < 0 || frequencies > 30) throw InputError("frequency count must be in [0, 30]");
      break;
    case BaselineScheme::kOneBlob:
      if (bins < 1) throw InputError("one-blob bin count must be >= 1");
      if (sigma < 0.0f) throw InputError("one-blob sigma must be >= 0");
      break;
    default: throw InputError("unknown encoding scheme");
  }
}

double triangle_wave(double t) noexcept {
  const double u = t + 0.25;
  return 1.0 - 4.0 * std::abs(u - std::floor(u) - 0.5);
}

template <typename Scalar>
void encode_baseline(const BaselineEncoding& enc, const Matrix<Scalar>& coords, Matrix<Scalar>& features) {
  const Eigen::Index batch = coords.cols();
  const int per_dim = enc.width_per_dim();
  features.resize(3 * per_dim, batch);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar sigma = static_cast<Scalar>(enc.effective_sigma());
  const Scalar inv_two_var = Scalar(1) / (Scalar(2) * sigma * sigma);

  for (Eigen::Index b = 0; b < batch; ++b) {
    Scalar* out = features.col(b).data();
    for (int a = 0; a < 3; ++a) {
      const Scalar x = coords(a, b);
      Scalar* block = out + a * per_dim;
      switch (enc.scheme) {
        case BaselineScheme::kIdentity: block[0] = x; break;
        case BaselineScheme::kFrequency:
          for (int m = 0; m <= enc.frequencies; ++m) {
            const Scalar arg = std::ldexp(pi * x, m);
            block[2 * m] = std::sin(arg);
            block[2 * m + 1] = std::cos(arg);
          }
          break;
        case BaselineScheme::kTriangle:
          for (int m = 0; m <= enc.frequencies; ++m) {
            block[m] = static_cast<Scalar>(triangle_wave(std::ldexp(static_cast<double>(x), m)));
          }
          break;
        case BaselineScheme::kOneBlob:
          for (int j = 0; j < enc.bins; ++j) {
            const Scalar c = (static_cast<Scalar>(j) + Scalar(0.5)) / static_cast<Scalar>(enc.bins);
            block[j] = std::exp(-(x - c) * (x - c) * inv_two_var);
          }
          break;
      }
    }
  }
}

template void encode_baseline<float>(const BaselineEncoding&, const Matrix<float>&, Matrix<float>&);
template void encode_baseline<double>(const BaselineEncoding&, const Matrix<double>&, Matrix<double>&);

std::vector<double> encode_baseline(const BaselineEncoding& enc, std::array<double, 3> x) {
  Matrix<double> coords(3, 1);
  coords << x[0], x[1], x[2];
  Matrix<double> features;
  encode_baseline(enc, coords, features);
  return {features.data(), features.data() + features.size()};
}

}  // namespace nvr
