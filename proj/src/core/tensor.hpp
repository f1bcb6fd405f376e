#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace omniact {

/// Dense tensor in C order. Values are doubles in memory; the OTSR file
/// format stores f32, so save/load round-trips quantize to single precision.
struct Tensor {
  std::vector<uint32_t> dims;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<uint32_t> d);

  size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }

  // 3-D (c, i, j) accessor for feature maps laid out channel-major.
  double& at3(int c, int i, int j) {
    return values[(static_cast<size_t>(c) * dims[1] + i) * dims[2] + j];
  }
  double at3(int c, int i, int j) const {
    return values[(static_cast<size_t>(c) * dims[1] + i) * dims[2] + j];
  }
  // 2-D (i, j) accessor for masks and heatmaps.
  double& at2(int i, int j) {
    return values[static_cast<size_t>(i) * dims[1] + j];
  }
  double at2(int i, int j) const {
    return values[static_cast<size_t>(i) * dims[1] + j];
  }
};

/// Tensor file: magic "OTSR", u32 version=1, u32 ndim, u32 dims[ndim],
/// then f32 payload in C order, all little-endian.
Tensor read_tensor(const std::string& path);
void write_tensor(const Tensor& t, const std::string& path);

}  // namespace omniact
