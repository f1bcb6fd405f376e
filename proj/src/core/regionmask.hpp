#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core/tensor.hpp"

namespace omniact::regionmask {

/// Half-open pixel box [x0, x1) x [y0, y1) for one frame of a clip.
struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  int frame_index = 0;
};

/// Binary mask; bits are 0/1 bytes, row-major.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h);
  uint8_t& at(int x, int y) { return bits[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int x, int y) const {
    return bits[static_cast<size_t>(y) * width + x];
  }
  size_t count_ones() const;
};

/// Max-pools boxes across all frames of a clip: a cell is 1 iff any box of
/// any frame covers it. An empty box list produces an all-zero mask; a box
/// outside the frame bounds (or empty) is an error.
BinaryMask clip_mask(std::span<const BoundingBox> boxes, int frame_w,
                     int frame_h);

/// Max-pool resize: target cell is 1 iff any source cell scaling onto it
/// (by floor of the proportional coordinate) is 1. Preserves single
/// detections no matter how coarse the target grid is.
BinaryMask downsample_mask(const BinaryMask& mask, int target_w, int target_h);

/// Zeroes feature cells outside the mask: out[c,i,j] = f[c,i,j] * m[i,j].
/// The mask must match the feature map's spatial size.
Tensor apply_mask(const Tensor& features, const BinaryMask& mask);

/// Mask as a 2-D 0/1 tensor (the form stored in tensor files).
Tensor mask_to_tensor(const BinaryMask& mask);
BinaryMask mask_from_tensor(const Tensor& t);

}  // namespace omniact::regionmask
