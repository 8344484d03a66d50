#include "nvr/render.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include "nvr/errors.hpp"

namespace nvr {

namespace {

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 scale(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
Vec3 normalized(const Vec3& a) { return scale(a, 1.0 / norm(a)); }

// Slab test against [0,1]^3. Returns false on a miss.
bool intersect_unit_cube(const Vec3& origin, const Vec3& dir, double& t0, double& t1) {
  t0 = -std::numeric_limits<double>::infinity();
  t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-15) {
      if (origin[a] < 0.0 || origin[a] > 1.0) return false;
      continue;
    }
    double lo = (0.0 - origin[a]) / dir[a];
    double hi = (1.0 - origin[a]) / dir[a];
    if (lo > hi) std::swap(lo, hi);
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
  }
  t0 = std::max(t0, 0.0);
  return t1 > t0;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

TransferFunction::TransferFunction(std::vector<Point> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw InputError("transfer function needs at least two control points");
  if (points_.front().scalar != 0.0 || points_.back().scalar != 1.0) {
    throw InputError("transfer function must start at scalar 0 and end at 1");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (i > 0 && !(p.scalar > points_[i - 1].scalar)) {
      throw InputError("transfer function scalars must strictly increase");
    }
    for (double c : {p.rgba.r, p.rgba.g, p.rgba.b, p.rgba.a}) {
      if (!(c >= 0.0 && c <= 1.0)) throw InputError("transfer function components must lie in [0,1]");
    }
  }
}

Rgba TransferFunction::operator()(double s) const noexcept {
  s = std::clamp(s, 0.0, 1.0);
  auto hi = std::upper_bound(points_.begin(), points_.end(), s,
                             [](double v, const Point& p) { return v < p.scalar; });
  if (hi == points_.end()) return points_.back().rgba;
  if (hi == points_.begin()) return points_.front().rgba;
  const auto lo = hi - 1;
  const double t = (s - lo->scalar) / (hi->scalar - lo->scalar);
  const auto mix = [t](double a, double b) { return a + t * (b - a); };
  return {mix(lo->rgba.r, hi->rgba.r), mix(lo->rgba.g, hi->rgba.g), mix(lo->rgba.b, hi->rgba.b),
          mix(lo->rgba.a, hi->rgba.a)};
}

TransferFunction TransferFunction::parse(std::string_view text) {
  std::vector<Point> points;
  std::istringstream lines{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(lines, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    Point p{};
    if (!(fields >> p.scalar >> p.rgba.r >> p.rgba.g >> p.rgba.b >> p.rgba.a)) {
      throw InputError("transfer function line " + std::to_string(number) + ": expected 'scalar r g b a'");
    }
    points.push_back(p);
  }
  return TransferFunction(std::move(points));
}

TransferFunction TransferFunction::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open transfer function '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

TransferFunction TransferFunction::ramp(double max_alpha) {
  return TransferFunction({{0.0, {0, 0, 0, 0}}, {1.0, {1, 1, 1, max_alpha}}});
}

void Camera::validate() const {
  if (width < 1 || height < 1) throw InputError("image size must be positive");
  if (!(fov_y > 0.0 && fov_y < 3.14159265358979)) throw InputError("field of view must lie in (0, pi)");
  const Vec3 forward = sub(look_at, eye);
  if (norm(forward) < 1e-12) throw InputError("camera eye and look-at coincide");
  if (norm(cross(forward, up)) < 1e-12 * norm(forward) * std::max(norm(up), 1e-300)) {
    throw InputError("camera up vector is parallel to the view direction");
  }
}

// ---------------------------------------------------------------------------

double sample_trilinear(const Volume& v, const Vec3& x) {
  std::array<std::uint32_t, 3> i0{};
  std::array<double, 3> f{};
  for (int a = 0; a < 3; ++a) {
    const std::uint32_t n = v.dims[a];
    const double p = std::clamp(x[static_cast<std::size_t>(a)], 0.0, 1.0) * (n - 1);
    const auto base = std::min(static_cast<std::uint32_t>(p), n - 2);
    i0[static_cast<std::size_t>(a)] = base;
    f[static_cast<std::size_t>(a)] = p - base;
  }
  double result = 0.0;
  for (int c = 0; c < 8; ++c) {
    double w = 1.0;
    std::array<std::uint32_t, 3> idx{};
    for (int a = 0; a < 3; ++a) {
      const bool upper = (c >> a) & 1;
      idx[static_cast<std::size_t>(a)] = i0[static_cast<std::size_t>(a)] + (upper ? 1u : 0u);
      w *= upper ? f[static_cast<std::size_t>(a)] : 1.0 - f[static_cast<std::size_t>(a)];
    }
    if (w != 0.0) result += w * v.at(idx[0], idx[1], idx[2]);
  }
  return result;
}

FieldSource::FieldSource(const Volume& volume) : volume_(&volume) {}

FieldSource::FieldSource(const Model& model) : model_(&model), params_(effective_params(model)) {}

Dims FieldSource::dims() const noexcept { return volume_ ? volume_->dims : model_->dims; }

double FieldSource::sample(const Vec3& x) const {
  double out = 0.0;
  sample(std::span<const Vec3>(&x, 1), std::span<double>(&out, 1));
  return out;
}

void FieldSource::sample(std::span<const Vec3> xs, std::span<double> out) const {
  if (volume_) {
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = sample_trilinear(*volume_, xs[i]);
    return;
  }
  if (xs.empty()) return;
  Network<float> net(model_->spec);
  Matrix<float> coords(3, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      coords(a, static_cast<Eigen::Index>(i)) = static_cast<float>(std::clamp(xs[i][static_cast<std::size_t>(a)], 0.0, 1.0));
    }
  }
  Matrix<float> y;
  net.forward(params_, coords, y);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i] = std::clamp(static_cast<double>(y(0, static_cast<Eigen::Index>(i))), 0.0, 1.0);
  }
}

// ---------------------------------------------------------------------------

Image raymarch(const FieldSource& src, const Camera& cam, const TransferFunction& tf, const RenderOptions& opts) {
  cam.validate();
  const double extent = static_cast<double>(src.dims().max_extent());
  const double step = opts.step > 0.0 ? opts.step : 0.5 / extent;
  const double ref = opts.reference_step > 0.0 ? opts.reference_step : 1.0 / extent;
  const double exponent = step / ref;

  const Vec3 forward = normalized(sub(cam.look_at, cam.eye));
  const Vec3 right = normalized(cross(forward, cam.up));
  const Vec3 up = cross(right, forward);
  const double tan_half = std::tan(cam.fov_y / 2.0);
  const double aspect = static_cast<double>(cam.width) / cam.height;

  Image img;
  img.width = cam.width;
  img.height = cam.height;
  img.rgb.assign(3 * static_cast<std::size_t>(cam.width) * static_cast<std::size_t>(cam.height), 0);

  const auto render_row = [&](int py) {
    struct Ray {
      std::size_t first;
      std::size_t count;
      Vec3 dir;
    };
    std::vector<Vec3> positions;
    std::vector<Ray> rays(static_cast<std::size_t>(cam.width));
    const double v = (1.0 - 2.0 * (py + 0.5) / cam.height) * tan_half;
    for (int px = 0; px < cam.width; ++px) {
      const double u = (2.0 * (px + 0.5) / cam.width - 1.0) * tan_half * aspect;
      const Vec3 dir = normalized(add(forward, add(scale(right, u), scale(up, v))));
      auto& ray = rays[static_cast<std::size_t>(px)];
      ray.first = positions.size();
      ray.count = 0;
      ray.dir = dir;
      double t0 = 0.0;
      double t1 = 0.0;
      if (!intersect_unit_cube(cam.eye, dir, t0, t1)) continue;
      for (double t = t0 + 0.5 * step; t < t1; t += step) {
        positions.push_back(add(cam.eye, scale(dir, t)));
        ++ray.count;
      }
    }
    const std::size_t n = positions.size();
    const double h = 1.0 / extent;
    if (opts.shading) {
      positions.reserve(7 * n);
      for (std::size_t i = 0; i < n; ++i) {
        for (int a = 0; a < 3; ++a) {
          for (double sign : {-1.0, 1.0}) {
            Vec3 q = positions[i];
            q[static_cast<std::size_t>(a)] = std::clamp(q[static_cast<std::size_t>(a)] + sign * h, 0.0, 1.0);
            positions.push_back(q);
          }
        }
      }
    }
    std::vector<double> values(positions.size());
    src.sample(positions, values);
    const auto shade = [&](std::size_t i, const Vec3& dir) {
      Vec3 g{};
      for (std::size_t a = 0; a < 3; ++a) g[a] = values[n + 6 * i + 2 * a + 1] - values[n + 6 * i + 2 * a];
      const double len = std::sqrt(dot(g, g));
      if (len < 1e-12) return 1.0;
      return 0.3 + 0.7 * std::abs(dot(g, dir)) / len;
    };

    for (int px = 0; px < cam.width; ++px) {
      const auto& ray = rays[static_cast<std::size_t>(px)];
      double r = 0.0, g = 0.0, b = 0.0, acc = 0.0;
      for (std::size_t s = 0; s < ray.count && acc < opts.termination; ++s) {
        const Rgba c = tf(values[ray.first + s]);
        if (c.a <= 0.0) continue;
        const double alpha = 1.0 - std::pow(1.0 - c.a, exponent);
        double w = (1.0 - acc) * alpha;
        acc += w;
        if (opts.shading) w *= shade(ray.first + s, ray.dir);
        r += w * c.r;
        g += w * c.g;
        b += w * c.b;
      }
      const std::size_t i = 3 * (static_cast<std::size_t>(py) * static_cast<std::size_t>(cam.width) +
                                 static_cast<std::size_t>(px));
      const auto to_byte = [](double x) {
        return static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0));
      };
      img.rgb[i] = to_byte(r);
      img.rgb[i + 1] = to_byte(g);
      img.rgb[i + 2] = to_byte(b);
    }
  };

  const int threads = std::max(1, std::min(opts.threads, cam.height));
  if (threads == 1) {
    for (int py = 0; py < cam.height; ++py) render_row(py);
    return img;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int py = next++; py < cam.height; py = next++) render_row(py);
    });
  }
  for (auto& th : pool) th.join();
  return img;
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.rgb.begin(), img.rgb.end());
  return out;
}

void write_image(const Image& img, const std::filesystem::path& path) {
  const auto bytes = encode_ppm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

}  // namespace nvr
