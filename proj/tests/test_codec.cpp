#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "nvr/codec.hpp"
#include "nvr/errors.hpp"
#include "test_util.hpp"

namespace nvr {
namespace {

Model sample_model(const ModelSpec& spec, std::uint64_t seed) {
  Model m;
  m.spec = spec;
  m.params = init_params(spec, seed);
  // make the tables non-trivial so rounding matters
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 0.3f);
  for (std::size_t i = 0; i < spec.encoder_param_count(); ++i) m.params[i] = n(rng);
  m.dims = {30, 20, 10};
  m.vmin = -12.5f;
  m.vmax = 900.0f;
  m.source_dtype = {DtypeKind::kI16, Endian::kBig};
  return m;
}

CodecErrc decode_error(std::span<const std::uint8_t> bytes) {
  try {
    deserialize(bytes);
  } catch (const CodecError& e) {
    return e.code();
  }
  ADD_FAILURE() << "stream decoded without error";
  return CodecErrc::kMalformed;
}

void put_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (8 * i));
}

TEST(Codec, DefaultModelSizes) {
  const ModelSpec spec = ModelSpec::hash(HashConfig{});
  EXPECT_EQ(spec.param_count(), 203'969u);
  EXPECT_EQ(serialized_size(spec, Precision::kMixed16), 112u + 407'938u + 4u);
  EXPECT_EQ(serialized_size(spec, Precision::kFull32), 112u + 815'876u + 4u);
  EXPECT_EQ(serialize(sample_model(spec, 1), Precision::kMixed16).size(), serialized_size(spec, Precision::kMixed16));
}

TEST(Codec, Full32RoundTripIsBitExact) {
  for (const ModelSpec& spec : {ModelSpec::hash(HashConfig{}), ModelSpec::baseline({BaselineScheme::kOneBlob, 10, 16, 0.05f}, 3, 20),
                                ModelSpec::baseline({BaselineScheme::kFrequency, 6, 64, 0.0f}, 2, 8)}) {
    const Model m = sample_model(spec, 3);
    const auto bytes = serialize(m, Precision::kFull32);
    const Model back = deserialize(bytes);
    EXPECT_EQ(back.spec, m.spec);
    EXPECT_EQ(std::memcmp(back.params.data(), m.params.data(), m.params.size() * 4), 0);
    EXPECT_EQ(back.dims, m.dims);
    EXPECT_EQ(back.vmin, m.vmin);
    EXPECT_EQ(back.vmax, m.vmax);
    EXPECT_EQ(back.source_dtype, m.source_dtype);
    EXPECT_EQ(back.precision, Precision::kFull32);
    EXPECT_FALSE(back.meta_init);
    EXPECT_EQ(serialize(back, Precision::kFull32), bytes);
  }
}

TEST(Codec, Mixed16StoresHalfRounding) {
  const Model m = sample_model(ModelSpec::hash(HashConfig{}), 4);
  const auto bytes = serialize(m, Precision::kMixed16);
  const Model back = deserialize(bytes);
  EXPECT_EQ(back.precision, Precision::kMixed16);
  for (std::size_t i = 0; i < m.params.size(); ++i) ASSERT_EQ(back.params[i], half_roundtrip(m.params[i]));
  // canonical: re-encoding the decoded model gives the same bytes
  EXPECT_EQ(serialize(back, Precision::kMixed16), bytes);
}

TEST(Codec, PredictionsSurviveRoundTrip) {
  const Model m = sample_model(ModelSpec::hash(HashConfig{}), 5);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<std::array<float, 3>> coords(1000);
  for (auto& c : coords) c = {u(rng), u(rng), u(rng)};
  const auto before = predict(m, coords);
  const auto full = predict(deserialize(serialize(m, Precision::kFull32)), coords);
  EXPECT_EQ(before, full);

  Model half = m;
  half.precision = Precision::kMixed16;
  const auto expect16 = predict(half, coords);  // network already sees rounded params
  const auto got16 = predict(deserialize(serialize(m, Precision::kMixed16)), coords);
  for (std::size_t i = 0; i < coords.size(); ++i) ASSERT_EQ(got16[i], expect16[i]);
}

TEST(Codec, MetaFlagRoundTrips) {
  Model m = sample_model(ModelSpec::hash(HashConfig{}), 6);
  m.meta_init = true;
  const auto bytes = serialize(m, Precision::kFull32);
  EXPECT_EQ(bytes[6] & 1, 1);
  EXPECT_TRUE(deserialize(bytes).meta_init);
}

TEST(Codec, HeaderLayout) {
  const Model m = sample_model(ModelSpec::hash(HashConfig{}), 7);
  const auto b = serialize(m, Precision::kMixed16);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "NVRC");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[8], 112);
  EXPECT_EQ(b[12], 30);  // nx
  EXPECT_EQ(b[40], 6);   // levels
  EXPECT_EQ(b[100], 1);  // mixed16
  std::uint32_t count = 0;
  std::memcpy(&count, b.data() + 104, 4);
  EXPECT_EQ(count, 203'969u);
  const std::span<const std::uint8_t> payload(b.data() + 112, 407'938);
  std::uint32_t stored = 0;
  std::memcpy(&stored, b.data() + b.size() - 4, 4);
  EXPECT_EQ(stored, crc32(payload));
}

TEST(Codec, Crc32KnownValue) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())), 0xCBF43926u);
}

TEST(Codec, ErrorKinds) {
  const Model m = sample_model(ModelSpec::baseline({BaselineScheme::kTriangle, 4, 64, 0.0f}, 1, 8), 8);
  const auto good = serialize(m, Precision::kFull32);

  auto b = good;
  b[0] = 'X';
  EXPECT_EQ(decode_error(b), CodecErrc::kBadMagic);

  b = good;
  b[4] = 2;
  EXPECT_EQ(decode_error(b), CodecErrc::kUnsupportedVersion);

  b = good;
  b[112 + 5] ^= 0x40;
  EXPECT_EQ(decode_error(b), CodecErrc::kCrcMismatch);

  b = good;
  b[b.size() - 1] ^= 1;
  EXPECT_EQ(decode_error(b), CodecErrc::kCrcMismatch);

  b.assign(good.begin(), good.end() - 3);
  EXPECT_EQ(decode_error(b), CodecErrc::kTruncated);
  b.assign(good.begin(), good.begin() + 50);
  EXPECT_EQ(decode_error(b), CodecErrc::kTruncated);
  b.assign(good.begin(), good.begin() + 2);
  EXPECT_EQ(decode_error(b), CodecErrc::kTruncated);

  b = good;
  b.push_back(0);
  EXPECT_EQ(decode_error(b), CodecErrc::kMalformed);

  b = good;
  put_u32(b, 36, 9);  // encoder kind
  EXPECT_EQ(decode_error(b), CodecErrc::kMalformed);

  b = good;
  put_u32(b, 12, 1);  // nx below 2
  EXPECT_EQ(decode_error(b), CodecErrc::kMalformed);

  b = good;
  put_u32(b, 92, 9);  // hidden width no longer matches parameter count
  EXPECT_EQ(decode_error(b), CodecErrc::kMalformed);
}

TEST(Codec, FileRoundTrip) {
  testing::TempDir dir;
  const Model m = sample_model(ModelSpec::hash(HashConfig{}), 9);
  const auto size = write_model(dir / "m.nvrc", m, Precision::kMixed16);
  EXPECT_EQ(size, serialized_size(m.spec, Precision::kMixed16));
  EXPECT_EQ(std::filesystem::file_size(dir / "m.nvrc"), size);
  EXPECT_EQ(read_model(dir / "m.nvrc").params.size(), m.params.size());
  EXPECT_THROW(read_model(dir / "missing.nvrc"), IoError);
}

}  // namespace
}  // namespace nvr
