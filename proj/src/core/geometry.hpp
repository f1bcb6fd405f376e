#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/image.hpp"

namespace omniact::geometry {

struct CameraFov {
  double hfov_deg = 360.0;
  double vfov_deg = 235.0;
};

struct PanoramaSpec {
  int width_px = 0;
  int height_px = 0;
};

/// Normalized line a*x + b*y + c = 0 with a^2 + b^2 = 1. Unlike the slope
/// form k*x + y + z = 0 this also represents vertical lines; the absolute
/// point-line distance is |a*x + b*y + c| either way. The sign is
/// canonicalized (a > 0, or a == 0 and b > 0) so construction is
/// deterministic.
struct SpineLine {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double distance_to(double x, double y) const;
};

struct FisheyeCenter {
  double x = 0.0;
  double y = 0.0;
};

struct MappingParams {
  FisheyeCenter center;
  double radius_px = 0.0;
  double phi_deg = 0.0;
};

struct PointF {
  double x = 0.0;
  double y = 0.0;
};

enum class Interp { nearest, bilinear };

/// Panorama -> fisheye lookup table. Coordinates are continuous fisheye
/// positions for each panorama pixel center; out-of-frame entries are
/// (NaN, NaN). Entry (x, y) lives at coords[2*(y*w + x)].
struct MappingTable {
  PanoramaSpec spec;
  int fisheye_w = 0;
  int fisheye_h = 0;
  std::vector<float> coords;

  bool in_frame(int x, int y) const;
};

/// Panorama size from the FoV proportion h/w = vfov / (2*hfov).
PanoramaSpec panorama_dims(const CameraFov& fov, int height_px);

/// Line through mid-shoulder and mid-hip. Throws if the points coincide
/// (distance <= 1e-6 px).
SpineLine spine_from_keypoints(double shoulder_x, double shoulder_y,
                               double hip_x, double hip_y);

/// Point minimizing the sum of absolute distances to all lines.
///
/// The objective is convex but non-smooth; solved by iteratively reweighted
/// least squares (weights 1/max(d, 1e-6)) from the least-squares start,
/// stopping when the step drops below 1e-4 px or after 100 iterations.
/// Throws if fewer than two lines are given or all lines are parallel.
FisheyeCenter estimate_center(std::span<const SpineLine> spines);

/// Sum of absolute point-line distances (the objective minimized above).
double center_objective(std::span<const SpineLine> spines, double x, double y);

/// Coordinate-wise mean of per-frame centers. Throws on an empty list.
FisheyeCenter averaged_center(std::span<const FisheyeCenter> centers);

/// Distance from the center to the furthest frame corner, so r_f <= r for
/// every pixel and nothing is clipped.
double fisheye_radius(const FisheyeCenter& center, int frame_w, int frame_h);

/// Maps a continuous panorama position to fisheye coordinates:
///   theta = 360 * x_p / w        (degrees)
///   r_f   = r * (h - y_p) / h
///   x_f   = x_c + r_f * cos(phi - theta)
///   y_f   = y_c - r_f * sin(phi - theta)
/// Returns nullopt when the target falls outside [0, fe_w) x [0, fe_h).
std::optional<PointF> map_pixel(double x_p, double y_p,
                                const PanoramaSpec& spec,
                                const MappingParams& params, int fisheye_w,
                                int fisheye_h);

/// Evaluates map_pixel at every panorama pixel center (i + 0.5, j + 0.5).
MappingTable build_mapping(const PanoramaSpec& spec,
                           const MappingParams& params, int fisheye_w,
                           int fisheye_h);

/// Resamples a fisheye frame through the table. Out-of-frame pixels are
/// black. Throws if the frame does not match the table's fisheye size.
Image remap(const Image& frame, const MappingTable& table, Interp interp);

/// Mapping cache: magic "OMAP", u32 version=1, u32 w, u32 h, then w*h
/// records of two f32 (x_f, y_f) in row-major order; NaN,NaN marks
/// out-of-frame. The file does not carry the fisheye size, so the loader
/// takes the expected size and validates every in-frame entry against it.
void save_mapping(const MappingTable& table, const std::string& path);
MappingTable load_mapping(const std::string& path, int fisheye_w,
                          int fisheye_h);

}  // namespace omniact::geometry
