#include "core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "core/binio.hpp"
#include "core/error.hpp"
#include "core/parallel.hpp"

namespace omniact::geometry {

namespace {
constexpr double kDegToRad = 0.017453292519943295;
constexpr char kMapMagic[4] = {'O', 'M', 'A', 'P'};
constexpr uint32_t kMapVersion = 1;
}  // namespace

double SpineLine::distance_to(double x, double y) const {
  return std::abs(a * x + b * y + c);
}

bool MappingTable::in_frame(int x, int y) const {
  const size_t idx = 2 * (static_cast<size_t>(y) * spec.width_px + x);
  return !std::isnan(coords[idx]);
}

PanoramaSpec panorama_dims(const CameraFov& fov, int height_px) {
  if (!(fov.hfov_deg > 0.0) || fov.hfov_deg > 360.0 || !(fov.vfov_deg > 0.0) ||
      fov.vfov_deg > 360.0) {
    throw_invalid("field of view must be in (0, 360] degrees");
  }
  if (height_px < 1) throw_invalid("panorama height must be >= 1");
  const double w = std::round(height_px * 2.0 * fov.hfov_deg / fov.vfov_deg);
  PanoramaSpec spec;
  spec.height_px = height_px;
  spec.width_px = std::max(1, static_cast<int>(w));
  return spec;
}

SpineLine spine_from_keypoints(double shoulder_x, double shoulder_y,
                               double hip_x, double hip_y) {
  const double dx = hip_x - shoulder_x;
  const double dy = hip_y - shoulder_y;
  const double len = std::hypot(dx, dy);
  if (len <= 1e-6) {
    throw_invalid("degenerate spine: keypoints coincide");
  }
  SpineLine line;
  line.a = -dy / len;
  line.b = dx / len;
  line.c = -(line.a * shoulder_x + line.b * shoulder_y);
  if (line.a < 0.0 || (line.a == 0.0 && line.b < 0.0)) {
    line.a = -line.a;
    line.b = -line.b;
    line.c = -line.c;
  }
  return line;
}

double center_objective(std::span<const SpineLine> spines, double x, double y) {
  double total = 0.0;
  for (const SpineLine& s : spines) total += s.distance_to(x, y);
  return total;
}

namespace {

// Solves the 2x2 normal equations sum(w * n * n^T) p = -sum(w * c * n).
// Returns false when the system is (near) singular, i.e. the lines are
// mutually parallel.
bool solve_weighted(std::span<const SpineLine> spines,
                    std::span<const double> weights, FisheyeCenter* out) {
  double m00 = 0.0, m01 = 0.0, m11 = 0.0, r0 = 0.0, r1 = 0.0, wsum = 0.0;
  for (size_t i = 0; i < spines.size(); ++i) {
    const SpineLine& s = spines[i];
    const double w = weights.empty() ? 1.0 : weights[i];
    m00 += w * s.a * s.a;
    m01 += w * s.a * s.b;
    m11 += w * s.b * s.b;
    r0 -= w * s.c * s.a;
    r1 -= w * s.c * s.b;
    wsum += w;
  }
  const double det = m00 * m11 - m01 * m01;
  if (!(det > 1e-12 * wsum * wsum)) return false;
  out->x = (m11 * r0 - m01 * r1) / det;
  out->y = (m00 * r1 - m01 * r0) / det;
  return true;
}

}  // namespace

FisheyeCenter estimate_center(std::span<const SpineLine> spines) {
  if (spines.size() < 2) {
    throw_invalid("center estimation needs at least two spine lines");
  }
  FisheyeCenter p;
  if (!solve_weighted(spines, {}, &p)) {
    throw_invalid("center underdetermined: spine lines are mutually parallel");
  }
  std::vector<double> weights(spines.size());
  for (int iter = 0; iter < 100; ++iter) {
    for (size_t i = 0; i < spines.size(); ++i) {
      weights[i] = 1.0 / std::max(spines[i].distance_to(p.x, p.y), 1e-6);
    }
    FisheyeCenter next;
    if (!solve_weighted(spines, weights, &next)) break;
    const double step = std::hypot(next.x - p.x, next.y - p.y);
    p = next;
    if (step < 1e-4) break;
  }
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
    throw_numeric("center estimation diverged");
  }

  // The reweighting can pin itself to a kink short of the optimum. The
  // objective is coercive convex piecewise-linear, so its minimum is
  // attained at an intersection of two input lines; sweeping all pairs
  // makes the result exact. O(K^3), fine for per-frame spine counts.
  double best = center_objective(spines, p.x, p.y);
  for (size_t i = 0; i < spines.size(); ++i) {
    for (size_t j = i + 1; j < spines.size(); ++j) {
      const SpineLine& u = spines[i];
      const SpineLine& v = spines[j];
      const double det = u.a * v.b - v.a * u.b;
      if (std::abs(det) < 1e-12) continue;  // parallel pair
      const double x = (u.b * v.c - v.b * u.c) / det;
      const double y = (v.a * u.c - u.a * v.c) / det;
      const double obj = center_objective(spines, x, y);
      if (obj < best) {
        best = obj;
        p = {x, y};
      }
    }
  }
  return p;
}

FisheyeCenter averaged_center(std::span<const FisheyeCenter> centers) {
  if (centers.empty()) throw_invalid("cannot average an empty center list");
  FisheyeCenter mean;
  for (const FisheyeCenter& c : centers) {
    mean.x += c.x;
    mean.y += c.y;
  }
  mean.x /= static_cast<double>(centers.size());
  mean.y /= static_cast<double>(centers.size());
  return mean;
}

double fisheye_radius(const FisheyeCenter& center, int frame_w, int frame_h) {
  if (frame_w < 1 || frame_h < 1) throw_invalid("frame size must be positive");
  const double xs[2] = {0.0, static_cast<double>(frame_w)};
  const double ys[2] = {0.0, static_cast<double>(frame_h)};
  double r = 0.0;
  for (double cx : xs) {
    for (double cy : ys) {
      r = std::max(r, std::hypot(center.x - cx, center.y - cy));
    }
  }
  return r;
}

std::optional<PointF> map_pixel(double x_p, double y_p,
                                const PanoramaSpec& spec,
                                const MappingParams& params, int fisheye_w,
                                int fisheye_h) {
  const double theta = 360.0 * x_p / spec.width_px;
  const double r_f =
      params.radius_px * (spec.height_px - y_p) / spec.height_px;
  const double ang = (params.phi_deg - theta) * kDegToRad;
  PointF f;
  f.x = params.center.x + r_f * std::cos(ang);
  f.y = params.center.y - r_f * std::sin(ang);
  if (f.x < 0.0 || f.x >= fisheye_w || f.y < 0.0 || f.y >= fisheye_h) {
    return std::nullopt;
  }
  return f;
}

MappingTable build_mapping(const PanoramaSpec& spec,
                           const MappingParams& params, int fisheye_w,
                           int fisheye_h) {
  if (spec.width_px < 1 || spec.height_px < 1) {
    throw_invalid("panorama size must be positive");
  }
  if (fisheye_w < 1 || fisheye_h < 1) {
    throw_invalid("fisheye size must be positive");
  }
  if (!(params.radius_px > 0.0)) throw_invalid("mapping radius must be > 0");

  MappingTable table;
  table.spec = spec;
  table.fisheye_w = fisheye_w;
  table.fisheye_h = fisheye_h;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  table.coords.assign(2 * static_cast<size_t>(spec.width_px) * spec.height_px,
                      nan);

  parallel_chunks(spec.height_px, [&](int row_begin, int row_end) {
    for (int y = row_begin; y < row_end; ++y) {
      size_t idx = 2 * static_cast<size_t>(y) * spec.width_px;
      for (int x = 0; x < spec.width_px; ++x, idx += 2) {
        const auto f = map_pixel(x + 0.5, y + 0.5, spec, params, fisheye_w,
                                 fisheye_h);
        if (f) {
          table.coords[idx] = static_cast<float>(f->x);
          table.coords[idx + 1] = static_cast<float>(f->y);
        }
      }
    }
  });
  return table;
}

namespace {

inline int clamp_int(int v, int lo, int hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

// Samples the frame at a continuous position; pixel (i, j) is centered at
// (i + 0.5, j + 0.5). Bilinear clamps to the border.
inline void sample(const Image& frame, float fx, float fy, Interp interp,
                   uint8_t* out) {
  if (interp == Interp::nearest) {
    const int x = clamp_int(static_cast<int>(fx), 0, frame.width - 1);
    const int y = clamp_int(static_cast<int>(fy), 0, frame.height - 1);
    for (int c = 0; c < frame.channels; ++c) out[c] = frame.at(x, y, c);
    return;
  }
  const double u = fx - 0.5;
  const double v = fy - 0.5;
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  const double tx = u - x0;
  const double ty = v - y0;
  const int xa = clamp_int(x0, 0, frame.width - 1);
  const int xb = clamp_int(x0 + 1, 0, frame.width - 1);
  const int ya = clamp_int(y0, 0, frame.height - 1);
  const int yb = clamp_int(y0 + 1, 0, frame.height - 1);
  for (int c = 0; c < frame.channels; ++c) {
    const double top = (1.0 - tx) * frame.at(xa, ya, c) + tx * frame.at(xb, ya, c);
    const double bot = (1.0 - tx) * frame.at(xa, yb, c) + tx * frame.at(xb, yb, c);
    const double val = (1.0 - ty) * top + ty * bot;
    out[c] = static_cast<uint8_t>(
        clamp_int(static_cast<int>(std::lround(val)), 0, 255));
  }
}

}  // namespace

Image remap(const Image& frame, const MappingTable& table, Interp interp) {
  if (frame.width != table.fisheye_w || frame.height != table.fisheye_h) {
    throw_invalid("frame size does not match the mapping table's fisheye size");
  }
  Image out(table.spec.width_px, table.spec.height_px, frame.channels);
  parallel_chunks(out.height, [&](int row_begin, int row_end) {
    for (int y = row_begin; y < row_end; ++y) {
      size_t idx = 2 * static_cast<size_t>(y) * out.width;
      for (int x = 0; x < out.width; ++x, idx += 2) {
        const float fx = table.coords[idx];
        if (std::isnan(fx)) continue;  // out of frame stays black
        sample(frame, fx, table.coords[idx + 1], interp,
               &out.at(x, y, 0));
      }
    }
  });
  return out;
}

void save_mapping(const MappingTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot open mapping file for writing: " + path);
  binio::put_magic(out, kMapMagic);
  binio::put_u32(out, kMapVersion);
  binio::put_u32(out, static_cast<uint32_t>(table.spec.width_px));
  binio::put_u32(out, static_cast<uint32_t>(table.spec.height_px));
  for (float f : table.coords) binio::put_f32(out, f);
  if (!out) throw_io("failed writing mapping: " + path);
}

MappingTable load_mapping(const std::string& path, int fisheye_w,
                          int fisheye_h) {
  if (fisheye_w < 1 || fisheye_h < 1) {
    throw_invalid("fisheye size must be positive");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open mapping file: " + path);
  binio::expect_magic(in, kMapMagic, path);
  const uint32_t version = binio::get_u32(in, path + " version");
  if (version != kMapVersion) {
    throw_io(path + ": unsupported mapping version " + std::to_string(version));
  }
  MappingTable table;
  table.spec.width_px = static_cast<int>(binio::get_u32(in, path + " width"));
  table.spec.height_px = static_cast<int>(binio::get_u32(in, path + " height"));
  if (table.spec.width_px < 1 || table.spec.height_px < 1 ||
      static_cast<size_t>(table.spec.width_px) * table.spec.height_px >
          (size_t{1} << 30)) {
    throw_io(path + ": unreasonable mapping size");
  }
  table.fisheye_w = fisheye_w;
  table.fisheye_h = fisheye_h;
  const size_t n =
      2 * static_cast<size_t>(table.spec.width_px) * table.spec.height_px;
  table.coords.resize(n);
  for (size_t i = 0; i < n; i += 2) {
    const float fx = binio::get_f32(in, path + " entries");
    const float fy = binio::get_f32(in, path + " entries");
    if (std::isnan(fx) != std::isnan(fy)) {
      throw_io(path + ": half-NaN mapping entry");
    }
    if (!std::isnan(fx) &&
        (fx < 0.0f || fx >= fisheye_w || fy < 0.0f || fy >= fisheye_h)) {
      throw_invalid(path + ": mapping table was not built for a " +
                    std::to_string(fisheye_w) + "x" +
                    std::to_string(fisheye_h) + " fisheye frame");
    }
    table.coords[i] = fx;
    table.coords[i + 1] = fy;
  }
  return table;
}

}  // namespace omniact::geometry
