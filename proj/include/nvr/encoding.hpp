#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace nvr {

/// Column-major dense matrix; throughout the library a column is one sample,
/// so a (width x batch) matrix is laid out sample-major in memory.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Multi-resolution hash encoding

inline constexpr std::array<std::uint32_t, 3> kDefaultPrimes{1u, 2654435761u, 805459861u};

struct HashConfig {
  int levels = 6;                         // L
  int features = 8;                       // W, features per table entry
  std::uint32_t table_size = 1u << 12;    // T, entries per level
  int n0 = 16;                            // coarsest resolution
  int nmax = 512;                         // finest resolution
  std::array<std::uint32_t, 3> primes = kDefaultPrimes;

  int output_width() const noexcept { return levels * features; }
  std::size_t param_count() const noexcept {
    return static_cast<std::size_t>(levels) * table_size * static_cast<std::size_t>(features);
  }
  // Throws InputError on out-of-range fields or L=1 with n0 != nmax.
  void validate() const;

  friend bool operator==(const HashConfig&, const HashConfig&) = default;
};

/// Per-level resolution multiplier exp((ln Nmax - ln N0)/(L-1)); 1 when the
/// endpoints coincide.
double growth_factor(const HashConfig& cfg);

/// floor(N0 * b^l) for l in [0, L).
std::vector<int> level_resolutions(const HashConfig& cfg);

/// The 8 lattice corners around x at one level with their trilinear weights.
/// Corner c uses offset bit 0 for x, bit 1 for y, bit 2 for z.
struct CellCorners {
  std::array<std::array<std::uint32_t, 3>, 8> corner{};
  std::array<double, 8> weight{};
};

CellCorners cell_corners(std::array<double, 3> x, int resolution);

/// XOR of corner_i * prime_i in wrapping 64-bit arithmetic, reduced mod T.
inline std::uint32_t hash_index(std::array<std::uint32_t, 3> corner, const std::array<std::uint32_t, 3>& primes,
                                std::uint32_t table_size) noexcept {
  const std::uint64_t h = (std::uint64_t{corner[0]} * primes[0]) ^ (std::uint64_t{corner[1]} * primes[1]) ^
                          (std::uint64_t{corner[2]} * primes[2]);
  return static_cast<std::uint32_t>(h % table_size);
}

inline std::uint32_t hash_index(std::array<std::uint32_t, 3> corner, const HashConfig& cfg) noexcept {
  return hash_index(corner, cfg.primes, cfg.table_size);
}

/// Interpolation state kept from forward for backward: for every sample,
/// level and corner, the flat offset of the entry in the table buffer and its
/// trilinear weight.
template <typename Scalar>
struct HashCache {
  std::size_t batch = 0;
  std::vector<std::uint32_t> offset;  // batch * L * 8
  std::vector<Scalar> weight;         // batch * L * 8
};

/// Trainable tables live in one flat buffer, level-major then entry then
/// feature: tables[(l * T + h) * W + f].
class HashEncoding {
 public:
  explicit HashEncoding(HashConfig cfg);

  const HashConfig& config() const noexcept { return cfg_; }
  const std::vector<int>& resolutions() const noexcept { return resolutions_; }
  int output_width() const noexcept { return cfg_.output_width(); }
  std::size_t param_count() const noexcept { return cfg_.param_count(); }

  /// coords: 3 x B in [0,1]; features: (L*W) x B, levels concatenated coarse
  /// to fine.
  template <typename Scalar>
  void forward(std::span<const Scalar> tables, const Matrix<Scalar>& coords, Matrix<Scalar>& features,
               HashCache<Scalar>& cache) const;

  /// Adds weight * grad_slice into each touched entry of grad_tables.
  /// Colliding corners accumulate additively.
  template <typename Scalar>
  void backward(const HashCache<Scalar>& cache, const Matrix<Scalar>& grad_features,
                std::span<Scalar> grad_tables) const;

  /// Uniform in [-1e-4, 1e-4].
  void init_tables(std::span<float> tables, std::uint64_t seed) const;

 private:
  HashConfig cfg_;
  std::vector<int> resolutions_;
};

// ---------------------------------------------------------------------------
// Non-parametric baselines

enum class BaselineScheme : std::uint8_t { kIdentity = 1, kFrequency = 2, kTriangle = 3, kOneBlob = 4 };

std::string to_string(BaselineScheme scheme);
BaselineScheme parse_baseline_scheme(std::string_view name);

struct BaselineEncoding {
  BaselineScheme scheme = BaselineScheme::kIdentity;
  int frequencies = 10;  // M, highest octave for frequency/triangle
  int bins = 64;         // k for one-blob
  float sigma = 0.0f;    // one-blob kernel width; 0 means 1/k

  float effective_sigma() const noexcept { return sigma > 0.0f ? sigma : 1.0f / static_cast<float>(bins); }
  int width_per_dim() const noexcept;
  int output_width() const noexcept { return 3 * width_per_dim(); }
  void validate() const;

  friend bool operator==(const BaselineEncoding&, const BaselineEncoding&) = default;
};

/// Period-1 triangle wave with tri(0) = 0, tri(1/4) = 1, range [-1, 1].
double triangle_wave(double t) noexcept;

template <typename Scalar>
void encode_baseline(const BaselineEncoding& enc, const Matrix<Scalar>& coords, Matrix<Scalar>& features);

std::vector<double> encode_baseline(const BaselineEncoding& enc, std::array<double, 3> x);

}  // namespace nvr
