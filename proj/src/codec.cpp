#include "nvr/codec.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "nvr/errors.hpp"

namespace nvr {

const char* to_string(CodecErrc code) {
  switch (code) {
    case CodecErrc::kBadMagic: return "bad magic";
    case CodecErrc::kUnsupportedVersion: return "unsupported version";
    case CodecErrc::kCrcMismatch: return "CRC mismatch";
    case CodecErrc::kTruncated: return "truncated stream";
    case CodecErrc::kMalformed: return "malformed header";
  }
  return "codec error";
}

namespace {

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out_.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(in_[pos_] | (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= std::uint32_t{in_[pos_ + static_cast<std::size_t>(b)]} << (8 * b);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw CodecError(CodecErrc::kTruncated, "header cut short");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFull) throw InputError(std::string(what) + " does not fit the container");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = ::crc32(crc, bytes.data() + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint64_t serialized_size(const ModelSpec& spec, Precision mode) {
  const std::uint64_t width = mode == Precision::kMixed16 ? 2 : 4;
  return kNvrcHeaderBytes + width * spec.param_count() + 4;
}

std::vector<std::uint8_t> serialize(const Model& model) { return serialize(model, model.precision); }

std::vector<std::uint8_t> serialize(const Model& model, Precision mode) {
  model.spec.validate();
  if (model.params.size() != model.spec.param_count()) throw InputError("model parameters do not match its shape");
  const std::size_t width = mode == Precision::kMixed16 ? 2 : 4;

  std::vector<std::uint8_t> out;
  out.reserve(serialized_size(model.spec, mode));
  Writer w(out);
  out.insert(out.end(), kNvrcMagic.begin(), kNvrcMagic.end());
  w.u16(kNvrcVersion);
  w.u16(model.meta_init ? kFlagMetaInit : 0);
  w.u32(static_cast<std::uint32_t>(kNvrcHeaderBytes));
  w.u32(model.dims.nx);
  w.u32(model.dims.ny);
  w.u32(model.dims.nz);
  w.u32(static_cast<std::uint32_t>(model.source_dtype.kind) |
        (static_cast<std::uint32_t>(model.source_dtype.endian) << 8));
  w.f32(model.vmin);
  w.f32(model.vmax);

  HashConfig hash{0, 0, 0, 0, 0, {0, 0, 0}};
  BaselineEncoding base{BaselineScheme::kIdentity, 0, 0, 0.0f};
  EncoderCode code = EncoderCode::kHash;
  if (const auto* h = std::get_if<HashConfig>(&model.spec.encoder)) {
    hash = *h;
  } else {
    base = std::get<BaselineEncoding>(model.spec.encoder);
    code = static_cast<EncoderCode>(base.scheme);
  }
  w.u32(static_cast<std::uint32_t>(code));
  w.u32(static_cast<std::uint32_t>(hash.levels));
  w.u32(static_cast<std::uint32_t>(hash.features));
  w.u32(hash.table_size);
  w.u32(static_cast<std::uint32_t>(hash.n0));
  w.u32(static_cast<std::uint32_t>(hash.nmax));
  for (auto p : hash.primes) w.u32(p);
  w.u32(static_cast<std::uint32_t>(base.frequencies));
  w.u32(static_cast<std::uint32_t>(base.bins));
  w.f32(base.sigma);

  w.u32(static_cast<std::uint32_t>(model.spec.mlp.input_width));
  w.u32(static_cast<std::uint32_t>(model.spec.mlp.hidden_layers));
  w.u32(static_cast<std::uint32_t>(model.spec.mlp.hidden_width));
  w.u32(static_cast<std::uint32_t>(model.spec.mlp.output_width));
  w.u32(static_cast<std::uint32_t>(mode));
  w.u32(checked_u32(model.params.size(), "parameter count"));
  w.u32(checked_u32(model.params.size() * width, "payload size"));

  const std::size_t payload_begin = out.size();
  if (mode == Precision::kMixed16) {
    for (float p : model.params) w.u16(float_to_half_bits(p));
  } else {
    for (float p : model.params) w.f32(p);
  }
  const std::uint32_t crc = crc32(std::span<const std::uint8_t>(out).subspan(payload_begin));
  w.u32(crc);
  return out;
}

Model deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kNvrcMagic.size()) throw CodecError(CodecErrc::kTruncated, "shorter than the magic");
  if (!std::equal(kNvrcMagic.begin(), kNvrcMagic.end(), bytes.begin())) {
    throw CodecError(CodecErrc::kBadMagic, "not an .nvrc stream");
  }
  Reader r(bytes.subspan(kNvrcMagic.size()));
  const std::uint16_t version = r.u16();
  if (version != kNvrcVersion) {
    throw CodecError(CodecErrc::kUnsupportedVersion, "version " + std::to_string(version));
  }
  const std::uint16_t flags = r.u16();
  const std::uint32_t header_bytes = r.u32();
  if (header_bytes != kNvrcHeaderBytes) {
    throw CodecError(CodecErrc::kMalformed, "header size " + std::to_string(header_bytes));
  }

  Model m;
  m.meta_init = (flags & kFlagMetaInit) != 0;
  m.dims.nx = r.u32();
  m.dims.ny = r.u32();
  m.dims.nz = r.u32();
  const std::uint32_t dtype = r.u32();
  if ((dtype & 0xFF) > static_cast<std::uint32_t>(DtypeKind::kF32) || (dtype >> 8) > 1) {
    throw CodecError(CodecErrc::kMalformed, "unknown source dtype code");
  }
  m.source_dtype.kind = static_cast<DtypeKind>(dtype & 0xFF);
  m.source_dtype.endian = static_cast<Endian>(dtype >> 8);
  m.vmin = r.f32();
  m.vmax = r.f32();

  const std::uint32_t code = r.u32();
  HashConfig hash;
  hash.levels = static_cast<int>(r.u32());
  hash.features = static_cast<int>(r.u32());
  hash.table_size = r.u32();
  hash.n0 = static_cast<int>(r.u32());
  hash.nmax = static_cast<int>(r.u32());
  for (auto& p : hash.primes) p = r.u32();
  BaselineEncoding base;
  base.frequencies = static_cast<int>(r.u32());
  base.bins = static_cast<int>(r.u32());
  base.sigma = r.f32();
  if (code == static_cast<std::uint32_t>(EncoderCode::kHash)) {
    m.spec.encoder = hash;
  } else if (code >= 1 && code <= 4) {
    base.scheme = static_cast<BaselineScheme>(code);
    m.spec.encoder = base;
  } else {
    throw CodecError(CodecErrc::kMalformed, "unknown encoder kind " + std::to_string(code));
  }
  m.spec.mlp.input_width = static_cast<int>(r.u32());
  m.spec.mlp.hidden_layers = static_cast<int>(r.u32());
  m.spec.mlp.hidden_width = static_cast<int>(r.u32());
  m.spec.mlp.output_width = static_cast<int>(r.u32());
  const std::uint32_t mode = r.u32();
  if (mode > 1) throw CodecError(CodecErrc::kMalformed, "unknown precision mode");
  m.precision = static_cast<Precision>(mode);
  const std::uint32_t count = r.u32();
  const std::uint32_t payload_bytes = r.u32();
  const std::size_t width = m.precision == Precision::kMixed16 ? 2 : 4;
  if (std::uint64_t{count} * width != payload_bytes) {
    throw CodecError(CodecErrc::kMalformed, "payload size does not match parameter count");
  }

  const std::uint64_t expected = kNvrcHeaderBytes + std::uint64_t{payload_bytes} + 4;
  if (bytes.size() < expected) {
    throw CodecError(CodecErrc::kTruncated,
                     "expected " + std::to_string(expected) + " bytes, got " + std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) throw CodecError(CodecErrc::kMalformed, "trailing bytes after CRC");

  const auto payload = bytes.subspan(kNvrcHeaderBytes, payload_bytes);
  Reader crc_reader(bytes.subspan(kNvrcHeaderBytes + payload_bytes));
  const std::uint32_t stored_crc = crc_reader.u32();
  const std::uint32_t actual_crc = crc32(payload);
  if (stored_crc != actual_crc) throw CodecError(CodecErrc::kCrcMismatch, "payload checksum does not match");

  try {
    m.dims.validate();
    m.spec.validate();
  } catch (const InputError& e) {
    throw CodecError(CodecErrc::kMalformed, e.what());
  }
  if (m.spec.param_count() != count) {
    throw CodecError(CodecErrc::kMalformed, "parameter count does not match the declared model shape");
  }

  Reader pr(payload);
  m.params.resize(count);
  if (m.precision == Precision::kMixed16) {
    for (auto& p : m.params) p = half_bits_to_float(pr.u16());
  } else {
    for (auto& p : m.params) p = pr.f32();
  }
  return m;
}

std::uint64_t write_model(const std::filesystem::path& path, const Model& model, Precision mode) {
  const auto bytes = serialize(model, mode);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed on '" + path.string() + "'");
  return bytes.size();
}

Model read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace nvr
