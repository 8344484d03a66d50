#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nvr/errors.hpp"
#include "nvr/render.hpp"
#include "nvr/synthetic.hpp"

namespace nvr {
namespace {

Volume sphere_volume(std::uint32_t n, double radius) {
  const Dims d{n, n, n};
  std::vector<float> data(d.count());
  for (std::uint32_t k = 0; k < n; ++k)
    for (std::uint32_t j = 0; j < n; ++j)
      for (std::uint32_t i = 0; i < n; ++i) {
        const auto x = voxel_to_coord({i, j, k}, d);
        const double r = std::hypot(x[0] - 0.5, x[1] - 0.5, x[2] - 0.5);
        data[(std::size_t{k} * n + j) * n + i] = r <= radius ? 1.0f : 0.0f;
      }
  return from_normalized(d, std::move(data));
}

TransferFunction opaque_above_half() {
  return TransferFunction({{0.0, {0, 0, 0, 0}}, {0.49, {0, 0, 0, 0}}, {0.51, {1, 1, 1, 1}}, {1.0, {1, 1, 1, 1}}});
}

TEST(Trilinear, ReproducesLatticeAndLinearFields) {
  const Dims d{5, 4, 6};
  std::vector<float> data(d.count());
  for (std::uint32_t k = 0; k < d.nz; ++k)
    for (std::uint32_t j = 0; j < d.ny; ++j)
      for (std::uint32_t i = 0; i < d.nx; ++i) {
        const auto x = voxel_to_coord({i, j, k}, d);
        data[(std::size_t{k} * d.ny + j) * d.nx + i] = static_cast<float>(0.1 + 0.2 * x[0] + 0.3 * x[1] + 0.4 * x[2]);
      }
  const Volume v = from_normalized(d, data);
  EXPECT_FLOAT_EQ(sample_trilinear(v, voxel_to_coord({2, 1, 3}, d)), v.at(2, 1, 3));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const Vec3 x{u(rng), u(rng), u(rng)};
    EXPECT_NEAR(sample_trilinear(v, x), 0.1 + 0.2 * x[0] + 0.3 * x[1] + 0.4 * x[2], 1e-6);
  }
  EXPECT_NEAR(sample_trilinear(v, {1.0, 1.0, 1.0}), v.at(4, 3, 5), 1e-7);
  EXPECT_NEAR(sample_trilinear(v, {2.0, -1.0, 0.0}), v.at(4, 0, 0), 1e-7);  // clamped
}

TEST(TransferFunction, InterpolatesAndValidates) {
  const auto tf = TransferFunction::parse("# comment\n0 0 0 0 0\n0.5 1 0.5 0 0.2  # mid\n1 1 1 1 1\n");
  const Rgba c = tf(0.25);
  EXPECT_NEAR(c.r, 0.5, 1e-12);
  EXPECT_NEAR(c.g, 0.25, 1e-12);
  EXPECT_NEAR(c.a, 0.1, 1e-12);
  EXPECT_NEAR(tf(2.0).a, 1.0, 1e-12);
  EXPECT_THROW(TransferFunction::parse("0.1 0 0 0 0\n1 1 1 1 1\n"), InputError);
  EXPECT_THROW(TransferFunction::parse("0 0 0 0 0\n0.5 0 0 0 0\n0.5 0 0 0 0\n1 0 0 0 0\n"), InputError);
  EXPECT_THROW(TransferFunction::parse("0 0 0 0 0\n1 1 1 1 1.5\n"), InputError);
  EXPECT_THROW(TransferFunction::parse("0 0 0 0\n1 1 1 1 1\n"), InputError);
  EXPECT_THROW(TransferFunction::load("/nonexistent/tf.txt"), IoError);
}

TEST(Camera, RejectsDegenerateSetups) {
  Camera c;
  c.up = {c.look_at[0] - c.eye[0], c.look_at[1] - c.eye[1], c.look_at[2] - c.eye[2]};
  EXPECT_THROW(c.validate(), InputError);
  Camera d;
  d.eye = d.look_at;
  EXPECT_THROW(d.validate(), InputError);
  Camera e;
  e.fov_y = 3.5;
  EXPECT_THROW(e.validate(), InputError);
}

TEST(Raymarch, TransparentTransferFunctionIsBlack) {
  SyntheticOptions o;
  o.dims = {16, 16, 16};
  const Volume v = make_blob_volume(o);
  Camera cam;
  cam.width = cam.height = 32;
  const TransferFunction clear({{0.0, {1, 1, 1, 0}}, {1.0, {1, 1, 1, 0}}});
  const Image img = raymarch(FieldSource(v), cam, clear);
  for (auto b : img.rgb) ASSERT_EQ(b, 0);
}

TEST(Raymarch, CameraFacingAwayIsBlack) {
  const Volume v = sphere_volume(16, 0.4);
  Camera cam;
  cam.eye = {0.5, 0.5, 3.0};
  cam.look_at = {0.5, 0.5, 5.0};
  cam.width = cam.height = 24;
  const Image img = raymarch(FieldSource(v), cam, opaque_above_half());
  for (auto b : img.rgb) ASSERT_EQ(b, 0);
}

TEST(Raymarch, SphereSilhouetteMatchesProjection) {
  const double radius = 0.3, dist = 2.0;
  const Volume v = sphere_volume(64, radius);
  Camera cam;
  cam.eye = {0.5, 0.5, 0.5 + dist};
  cam.look_at = {0.5, 0.5, 0.5};
  cam.fov_y = 0.6;
  cam.width = cam.height = 128;
  const Image img = raymarch(FieldSource(v), cam, opaque_above_half());
  std::size_t white = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) white += img.pixel(x, y)[0] > 127 ? 1 : 0;
  const double measured = std::sqrt(static_cast<double>(white) / std::numbers::pi);
  const double expected = std::tan(std::asin(radius / dist)) / std::tan(cam.fov_y / 2) * (cam.height / 2.0);
  EXPECT_NEAR(measured, expected, 2.0);
  // centered: the middle pixel is lit, the corners are not
  EXPECT_GT(img.pixel(64, 64)[0], 200);
  EXPECT_EQ(img.pixel(0, 0)[0], 0);
}

TEST(Raymarch, CompositingFollowsOpacityCorrection) {
  const Volume v = from_normalized({8, 8, 8}, std::vector<float>(512, 0.5f));
  Camera cam;
  cam.eye = {0.5, 0.5, 3.0};
  cam.look_at = {0.5, 0.5, 0.0};
  cam.width = cam.height = 1;
  const double a = 0.1;
  const TransferFunction tf({{0.0, {1, 1, 1, a}}, {1.0, {1, 1, 1, a}}});
  RenderOptions opts;
  opts.termination = 1.0;
  const Image img = raymarch(FieldSource(v), cam, tf, opts);
  // the single ray runs down the z axis through the cube over t in [2, 3]
  const double step = 0.5 / 8, ref = 1.0 / 8;
  int n = 0;
  for (double t = 2.0 + 0.5 * step; t < 3.0; t += step) ++n;
  const double alpha = 1.0 - std::pow(1.0 - a, step / ref);
  const double acc = 1.0 - std::pow(1.0 - alpha, n);
  EXPECT_EQ(img.rgb[0], static_cast<std::uint8_t>(std::lround(acc * 255)));

  // same medium length, smaller step: correction keeps the result close
  opts.step = 0.25 / 8;
  const Image fine = raymarch(FieldSource(v), cam, tf, opts);
  EXPECT_NEAR(fine.rgb[0], img.rgb[0], 2);
}

TEST(Raymarch, EarlyTerminationCapsAccumulation) {
  const Volume v = from_normalized({8, 8, 8}, std::vector<float>(512, 1.0f));
  Camera cam;
  cam.width = cam.height = 4;
  cam.eye = {0.5, 0.5, 3.0};
  cam.look_at = {0.5, 0.5, 0.5};
  const TransferFunction tf({{0.0, {1, 1, 1, 0.9}}, {1.0, {1, 1, 1, 0.9}}});
  RenderOptions opts;
  opts.termination = 0.5;
  const Image img = raymarch(FieldSource(v), cam, tf, opts);
  // first sample already pushes past 0.5; no further samples are composited
  const double alpha = 1.0 - std::pow(0.1, 0.5);
  EXPECT_EQ(img.pixel(1, 1)[0], static_cast<std::uint8_t>(std::lround(alpha * 255)));
}

TEST(Raymarch, DeterministicAcrossThreadCounts) {
  SyntheticOptions o;
  o.dims = {20, 18, 16};
  o.noise_amplitude = 0.2;
  const Volume v = make_blob_volume(o);
  Camera cam;
  cam.width = 40;
  cam.height = 30;
  RenderOptions opts;
  const auto tf = TransferFunction::ramp(0.4);
  const Image a = raymarch(FieldSource(v), cam, tf, opts);
  const Image b = raymarch(FieldSource(v), cam, tf, opts);
  opts.threads = 3;
  const Image c = raymarch(FieldSource(v), cam, tf, opts);
  EXPECT_EQ(a.rgb, b.rgb);
  EXPECT_EQ(a.rgb, c.rgb);
  opts.shading = true;
  const Image s1 = raymarch(FieldSource(v), cam, tf, opts);
  opts.threads = 1;
  EXPECT_EQ(raymarch(FieldSource(v), cam, tf, opts).rgb, s1.rgb);
  EXPECT_NE(s1.rgb, a.rgb);
}

TEST(Raymarch, ShadingOnlyDarkens) {
  SyntheticOptions o;
  o.dims = {16, 16, 16};
  const Volume v = make_blob_volume(o);
  Camera cam;
  cam.width = cam.height = 24;
  const auto tf = TransferFunction::ramp(0.6);
  RenderOptions opts;
  const Image flat = raymarch(FieldSource(v), cam, tf, opts);
  opts.shading = true;
  const Image lit = raymarch(FieldSource(v), cam, tf, opts);
  for (std::size_t i = 0; i < flat.rgb.size(); ++i) ASSERT_LE(lit.rgb[i], flat.rgb[i]);
}

TEST(Raymarch, ModelSourceRenders) {
  const Volume v = sphere_volume(16, 0.35);
  Model m = init_model(ModelSpec::hash(HashConfig{}), v, 1);
  std::fill(m.params.begin() + static_cast<std::ptrdiff_t>(m.spec.encoder_param_count()), m.params.end(), 0.0f);
  m.params.back() = 1.0f;  // constant field 1 everywhere
  Camera cam;
  cam.width = cam.height = 16;
  cam.eye = {0.5, 0.5, 3.0};
  cam.look_at = {0.5, 0.5, 0.5};
  const Image img = raymarch(FieldSource(m), cam, opaque_above_half());
  EXPECT_EQ(img.pixel(8, 8)[0], 255);
  EXPECT_EQ(img.pixel(0, 0)[0], 0);  // outside the cube's silhouette
}

TEST(Ppm, HeaderAndSize) {
  Image img;
  img.width = 1;
  img.height = 1;
  img.rgb = {10, 20, 30};
  const auto bytes = encode_ppm(img);
  ASSERT_EQ(bytes.size(), 11u + 3u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 11), "P6\n1 1\n255\n");
  EXPECT_EQ(bytes[11], 10);
  EXPECT_EQ(bytes[13], 30);

  img.width = 7;
  img.height = 3;
  img.rgb.assign(63, 0);
  const auto b2 = encode_ppm(img);
  EXPECT_EQ(std::string(b2.begin(), b2.begin() + 11), "P6\n7 3\n255\n");
  EXPECT_EQ(b2.size(), 11u + 63u);
}

}  // namespace
}  // namespace nvr
