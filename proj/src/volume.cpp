#include "nvr/volume.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "nvr/errors.hpp"

namespace nvr {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T load_scalar(const unsigned char* p, Endian endian) {
  using Bits = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                                  std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint32_t>>;
  Bits bits = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    const std::size_t shift = endian == Endian::kLittle ? b : sizeof(T) - 1 - b;
    bits |= static_cast<Bits>(Bits{p[b]} << (8 * shift));
  }
  return std::bit_cast<T>(bits);
}

template <typename T>
void store_scalar(T value, unsigned char* p, Endian endian) {
  using Bits = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                                  std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint32_t>>;
  const auto bits = std::bit_cast<Bits>(value);
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    const std::size_t shift = endian == Endian::kLittle ? b : sizeof(T) - 1 - b;
    p[b] = static_cast<unsigned char>((bits >> (8 * shift)) & 0xFFu);
  }
}

template <typename T>
T round_clamp(double v) {
  const double lo = static_cast<double>(std::numeric_limits<T>::lowest());
  const double hi = static_cast<double>(std::numeric_limits<T>::max());
  return static_cast<T>(std::clamp(std::nearbyint(v), lo, hi));
}

}  // namespace

std::uint32_t Dims::max_extent() const noexcept { return std::max({nx, ny, nz}); }

void Dims::validate() const {
  if (nx < 2 || ny < 2 || nz < 2) {
    throw InputError("dims must be >= 2 on every axis, got " + to_string(*this));
  }
}

std::string to_string(const Dims& dims) {
  return std::to_string(dims.nx) + "x" + std::to_string(dims.ny) + "x" + std::to_string(dims.nz);
}

Dims parse_dims(std::string_view text) {
  std::array<std::uint32_t, 3> v{};
  std::size_t axis = 0;
  while (axis < 3) {
    const auto comma = text.find_first_of(",x");
    const auto token = trim(text.substr(0, comma));
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v[axis]);
    if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty()) {
      throw InputError("cannot parse dims '" + std::string(text) + "'");
    }
    ++axis;
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (axis != 3) throw InputError("dims need three components");
  Dims d{v[0], v[1], v[2]};
  d.validate();
  return d;
}

std::size_t ScalarDtype::byte_width() const noexcept {
  switch (kind) {
    case DtypeKind::kU8: return 1;
    case DtypeKind::kU16:
    case DtypeKind::kI16: return 2;
    case DtypeKind::kI32:
    case DtypeKind::kF32: return 4;
  }
  return 0;
}

std::string to_string(DtypeKind kind) {
  switch (kind) {
    case DtypeKind::kU8: return "u8";
    case DtypeKind::kU16: return "u16";
    case DtypeKind::kI16: return "i16";
    case DtypeKind::kI32: return "i32";
    case DtypeKind::kF32: return "f32";
  }
  return "?";
}

DtypeKind parse_dtype(std::string_view text) {
  text = trim(text);
  if (text == "u8" || text == "uint8") return DtypeKind::kU8;
  if (text == "u16" || text == "uint16") return DtypeKind::kU16;
  if (text == "i16" || text == "int16") return DtypeKind::kI16;
  if (text == "i32" || text == "int32") return DtypeKind::kI32;
  if (text == "f32" || text == "float32" || text == "float") return DtypeKind::kF32;
  throw InputError("unknown dtype '" + std::string(text) + "'");
}

Endian parse_endian(std::string_view text) {
  text = trim(text);
  if (text == "le" || text == "little") return Endian::kLittle;
  if (text == "be" || text == "big") return Endian::kBig;
  throw InputError("unknown endianness '" + std::string(text) + "'");
}

std::array<std::uint32_t, 3> Volume::unravel(std::size_t flat) const noexcept {
  const std::size_t plane = std::size_t{dims.nx} * dims.ny;
  const auto k = static_cast<std::uint32_t>(flat / plane);
  const std::size_t rem = flat % plane;
  return {static_cast<std::uint32_t>(rem % dims.nx), static_cast<std::uint32_t>(rem / dims.nx), k};
}

Volume normalize(Dims dims, const std::vector<double>& raw, ScalarDtype source) {
  dims.validate();
  if (raw.size() != dims.count()) {
    throw InputError("value count " + std::to_string(raw.size()) + " does not match dims " + to_string(dims));
  }
  Volume v;
  v.dims = dims;
  v.source_dtype = source;
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double vmin = *lo;
  const double vmax = *hi;
  v.vmin = static_cast<float>(vmin);
  v.vmax = static_cast<float>(vmax);
  v.data.resize(raw.size());
  if (vmax > vmin) {
    const double range = vmax - vmin;
    std::transform(raw.begin(), raw.end(), v.data.begin(),
                   [&](double x) { return static_cast<float>((x - vmin) / range); });
  } else {
    std::fill(v.data.begin(), v.data.end(), 0.0f);
  }
  return v;
}

Volume from_normalized(Dims dims, std::vector<float> data) {
  dims.validate();
  if (data.size() != dims.count()) throw InputError("value count does not match dims " + to_string(dims));
  Volume v;
  v.dims = dims;
  v.data = std::move(data);
  v.vmin = 0.0f;
  v.vmax = 1.0f;
  return v;
}

Volume normalize_with_range(Dims dims, const std::vector<double>& raw, float vmin, float vmax) {
  dims.validate();
  if (raw.size() != dims.count()) throw InputError("value count does not match dims " + to_string(dims));
  Volume v;
  v.dims = dims;
  v.vmin = vmin;
  v.vmax = vmax;
  v.data.resize(raw.size());
  const double lo = vmin;
  const double range = static_cast<double>(vmax) - lo;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    v.data[i] = range > 0.0 ? static_cast<float>((raw[i] - lo) / range) : 0.0f;
  }
  return v;
}

Volume load_raw(const std::filesystem::path& path, Dims dims, ScalarDtype dtype) {
  return normalize(dims, read_raw_values(path, dims, dtype), dtype);
}

std::vector<double> read_raw_values(const std::filesystem::path& path, Dims dims, ScalarDtype dtype) {
  dims.validate();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::error_code ec;
  const auto actual = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat '" + path.string() + "': " + ec.message());
  const std::uint64_t expected = dims.count() * dtype.byte_width();
  if (actual != expected) {
    throw InputError("size mismatch for '" + path.string() + "': expected " + std::to_string(expected) +
                     " bytes for " + to_string(dims) + " " + to_string(dtype.kind) + ", got " +
                     std::to_string(actual));
  }
  std::vector<unsigned char> bytes(expected);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(expected))) {
    throw IoError("short read on '" + path.string() + "'");
  }

  const std::size_t n = dims.count();
  const std::size_t w = dtype.byte_width();
  std::vector<double> raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* p = bytes.data() + i * w;
    switch (dtype.kind) {
      case DtypeKind::kU8: raw[i] = p[0]; break;
      case DtypeKind::kU16: raw[i] = load_scalar<std::uint16_t>(p, dtype.endian); break;
      case DtypeKind::kI16: raw[i] = load_scalar<std::int16_t>(p, dtype.endian); break;
      case DtypeKind::kI32: raw[i] = load_scalar<std::int32_t>(p, dtype.endian); break;
      case DtypeKind::kF32: raw[i] = load_scalar<float>(p, dtype.endian); break;
    }
  }
  for (double x : raw) {
    if (!std::isfinite(x)) throw InputError("non-finite sample in '" + path.string() + "'");
  }
  return raw;
}

void write_raw(const std::filesystem::path& path, const std::vector<double>& values, ScalarDtype dtype) {
  const std::size_t w = dtype.byte_width();
  std::vector<unsigned char> bytes(values.size() * w);
  for (std::size_t i = 0; i < values.size(); ++i) {
    unsigned char* p = bytes.data() + i * w;
    switch (dtype.kind) {
      case DtypeKind::kU8: p[0] = round_clamp<std::uint8_t>(values[i]); break;
      case DtypeKind::kU16: store_scalar(round_clamp<std::uint16_t>(values[i]), p, dtype.endian); break;
      case DtypeKind::kI16: store_scalar(round_clamp<std::int16_t>(values[i]), p, dtype.endian); break;
      case DtypeKind::kI32: store_scalar(round_clamp<std::int32_t>(values[i]), p, dtype.endian); break;
      case DtypeKind::kF32: store_scalar(static_cast<float>(values[i]), p, dtype.endian); break;
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

RawDescriptor parse_descriptor(std::string_view text) {
  RawDescriptor desc;
  bool have_dims = false;
  bool have_dtype = false;
  std::istringstream lines{std::string(text)};
  std::string line;
  while (std::getline(lines, line)) {
    auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw InputError("descriptor line without '=': " + line);
    const auto key = trim(body.substr(0, eq));
    const auto value = trim(body.substr(eq + 1));
    if (key == "dims") {
      desc.dims = parse_dims(value);
      have_dims = true;
    } else if (key == "dtype") {
      desc.dtype.kind = parse_dtype(value);
      have_dtype = true;
    } else if (key == "endian") {
      desc.dtype.endian = parse_endian(value);
    } else {
      throw InputError("unknown descriptor key '" + std::string(key) + "'");
    }
  }
  if (!have_dims || !have_dtype) throw InputError("descriptor needs both dims= and dtype=");
  return desc;
}

RawDescriptor read_descriptor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open descriptor '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_descriptor(ss.str());
}

std::string format_descriptor(const RawDescriptor& desc) {
  return "dims=" + std::to_string(desc.dims.nx) + "," + std::to_string(desc.dims.ny) + "," +
         std::to_string(desc.dims.nz) + "\ndtype=" + to_string(desc.dtype.kind) +
         "\nendian=" + (desc.dtype.endian == Endian::kLittle ? "le" : "be") + "\n";
}

std::array<double, 3> voxel_to_coord(std::array<std::uint32_t, 3> idx, Dims dims) {
  std::array<double, 3> x{};
  for (int a = 0; a < 3; ++a) {
    if (idx[a] >= dims[a]) {
      throw InputError("voxel index " + std::to_string(idx[a]) + " out of range on axis " + std::to_string(a));
    }
    x[a] = static_cast<double>(idx[a]) / static_cast<double>(dims[a] - 1);
  }
  return x;
}

std::uint64_t ground_truth_bytes(Dims dims) { return dims.count() * sizeof(float); }

std::uint64_t ground_truth_bytes(const Volume& v) { return ground_truth_bytes(v.dims); }

}  // namespace nvr
