#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <variant>
#include <vector>

#include "nvr/model.hpp"
#include "nvr/volume.hpp"

namespace nvr {

using Vec3 = std::array<double, 3>;

struct Rgba {
  double r = 0, g = 0, b = 0, a = 0;
};

/// Piecewise-linear map from scalar in [0,1] to color and opacity.
class TransferFunction {
 public:
  struct Point {
    double scalar;
    Rgba rgba;
  };

  /// Throws InputError unless scalars strictly increase from 0 to 1 and every
  /// component lies in [0,1].
  explicit TransferFunction(std::vector<Point> points);

  Rgba operator()(double s) const noexcept;
  const std::vector<Point>& points() const noexcept { return points_; }

  /// Lines of `scalar r g b a`; '#' starts a comment.
  static TransferFunction parse(std::string_view text);
  static TransferFunction load(const std::filesystem::path& path);
  /// Grayscale ramp with linearly increasing opacity.
  static TransferFunction ramp(double max_alpha = 0.5);

 private:
  std::vector<Point> points_;
};

struct Camera {
  Vec3 eye{2.0, 1.5, 2.5};
  Vec3 look_at{0.5, 0.5, 0.5};
  Vec3 up{0.0, 1.0, 0.0};
  double fov_y = 0.6;  // radians
  int width = 256;
  int height = 256;

  void validate() const;
};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // 3 * width * height, row-major from the top

  std::array<std::uint8_t, 3> pixel(int x, int y) const noexcept {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x));
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
};

/// Scalar field over the unit cube: a voxel grid (trilinear) or a network
/// (clamped to [0,1]).
class FieldSource {
 public:
  explicit FieldSource(const Volume& volume);
  explicit FieldSource(const Model& model);

  Dims dims() const noexcept;
  double sample(const Vec3& x) const;
  /// Batched sampling; the model path evaluates the network once per call.
  void sample(std::span<const Vec3> xs, std::span<double> out) const;

 private:
  const Volume* volume_ = nullptr;
  const Model* model_ = nullptr;
  std::vector<float> params_;
};

/// Trilinear interpolation of the voxel lattice at x in [0,1]^3.
double sample_trilinear(const Volume& v, const Vec3& x);

struct RenderOptions {
  double step = 0.0;           // world units; 0 = 0.5 / max(dims)
  double reference_step = 0.0; // opacity-correction reference; 0 = 1 / max(dims)
  double termination = 0.99;
  int threads = 1;
  // Headlight diffuse shading with normals from central differences of the
  // field (six extra samples per step).
  bool shading = false;
};

/// Front-to-back ray marching through the unit cube, black background.
Image raymarch(const FieldSource& src, const Camera& cam, const TransferFunction& tf, const RenderOptions& opts = {});

/// Binary PPM: "P6\n{w} {h}\n255\n" then RGB bytes.
void write_image(const Image& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_ppm(const Image& img);

}  // namespace nvr
