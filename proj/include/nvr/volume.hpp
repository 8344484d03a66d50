#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nvr {

/// Voxel counts per axis. Every axis must hold at least two samples so that
/// corner coordinates and central differences are defined.
struct Dims {
  std::uint32_t nx = 2;
  std::uint32_t ny = 2;
  std::uint32_t nz = 2;

  std::uint64_t count() const noexcept {
    return std::uint64_t{nx} * std::uint64_t{ny} * std::uint64_t{nz};
  }
  std::uint32_t max_extent() const noexcept;
  std::uint32_t operator[](int axis) const noexcept { return axis == 0 ? nx : (axis == 1 ? ny : nz); }

  // Throws InputError when any axis is below 2.
  void validate() const;

  friend bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& dims);
// Parses "X,Y,Z".
Dims parse_dims(std::string_view text);

enum class DtypeKind : std::uint8_t { kU8 = 0, kU16 = 1, kI16 = 2, kI32 = 3, kF32 = 4 };
enum class Endian : std::uint8_t { kLittle = 0, kBig = 1 };

struct ScalarDtype {
  DtypeKind kind = DtypeKind::kF32;
  Endian endian = Endian::kLittle;

  std::size_t byte_width() const noexcept;
  friend bool operator==(const ScalarDtype&, const ScalarDtype&) = default;
};

std::string to_string(DtypeKind kind);
DtypeKind parse_dtype(std::string_view text);
Endian parse_endian(std::string_view text);

/// Dense scalar grid, x fastest. `data` holds normalized intensities in [0,1];
/// the original range is kept in `vmin`/`vmax`.
struct Volume {
  Dims dims;
  std::vector<float> data;
  float vmin = 0.0f;
  float vmax = 0.0f;
  ScalarDtype source_dtype;

  std::size_t index(std::uint32_t i, std::uint32_t j, std::uint32_t k) const noexcept {
    return (std::size_t{k} * dims.ny + j) * dims.nx + i;
  }
  float at(std::uint32_t i, std::uint32_t j, std::uint32_t k) const noexcept { return data[index(i, j, k)]; }
  std::array<std::uint32_t, 3> unravel(std::size_t flat) const noexcept;

  // Original-range value for a normalized sample.
  double denormalize(float value) const noexcept {
    return static_cast<double>(value) * (static_cast<double>(vmax) - vmin) + vmin;
  }
};

/// Builds a normalized volume from raw values already widened to double.
/// Global min-max maps to [0,1]; a constant input maps to all zeros.
Volume normalize(Dims dims, const std::vector<double>& raw, ScalarDtype source);

/// Wraps an already-normalized [0,1] buffer (vmin=0, vmax=1).
Volume from_normalized(Dims dims, std::vector<float> data);

/// Loads a headerless x-fastest brick. The file size must equal
/// nx*ny*nz*bytewidth(dtype).
Volume load_raw(const std::filesystem::path& path, Dims dims, ScalarDtype dtype);

/// Raw sample values widened to double, in file order, without normalization.
std::vector<double> read_raw_values(const std::filesystem::path& path, Dims dims, ScalarDtype dtype);

/// Normalizes with a given range instead of the data's own min/max (values
/// are not clamped). A degenerate range maps everything to 0.
Volume normalize_with_range(Dims dims, const std::vector<double>& raw, float vmin, float vmax);

/// Writes values (one per voxel, original range) as a raw brick in `dtype`.
/// Integer outputs are rounded and clamped to the dtype range.
void write_raw(const std::filesystem::path& path, const std::vector<double>& values, ScalarDtype dtype);

/// Raw brick descriptor: `dims=256,256,256`, `dtype=u8`, `endian=le`.
struct RawDescriptor {
  Dims dims;
  ScalarDtype dtype;
};
RawDescriptor parse_descriptor(std::string_view text);
RawDescriptor read_descriptor(const std::filesystem::path& path);
std::string format_descriptor(const RawDescriptor& desc);

/// Cell-corner coordinate convention: index i maps to i/(n-1).
std::array<double, 3> voxel_to_coord(std::array<std::uint32_t, 3> idx, Dims dims);

/// Single-precision ground-truth size (nx*ny*nz*4), the compression-ratio
/// denominator.
std::uint64_t ground_truth_bytes(const Volume& v);
std::uint64_t ground_truth_bytes(Dims dims);

}  // namespace nvr
