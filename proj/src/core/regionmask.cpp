#include "core/regionmask.hpp"

#include <algorithm>

#include "core/error.hpp"

namespace omniact::regionmask {

BinaryMask::BinaryMask(int w, int h) : width(w), height(h) {
  if (w < 1 || h < 1) throw_invalid("mask size must be positive");
  bits.assign(static_cast<size_t>(w) * h, 0);
}

size_t BinaryMask::count_ones() const {
  size_t n = 0;
  for (uint8_t b : bits) n += b;
  return n;
}

BinaryMask clip_mask(std::span<const BoundingBox> boxes, int frame_w,
                     int frame_h) {
  BinaryMask mask(frame_w, frame_h);
  for (const BoundingBox& box : boxes) {
    if (box.x0 >= box.x1 || box.y0 >= box.y1) {
      throw_invalid("empty bounding box");
    }
    if (box.x0 < 0 || box.y0 < 0 || box.x1 > frame_w || box.y1 > frame_h) {
      throw_invalid("bounding box outside frame bounds");
    }
    for (int y = box.y0; y < box.y1; ++y) {
      std::fill(mask.bits.begin() + static_cast<size_t>(y) * frame_w + box.x0,
                mask.bits.begin() + static_cast<size_t>(y) * frame_w + box.x1,
                uint8_t{1});
    }
  }
  return mask;
}

BinaryMask downsample_mask(const BinaryMask& mask, int target_w,
                           int target_h) {
  if (target_w < 1 || target_h < 1) throw_invalid("target size must be >= 1");
  BinaryMask out(target_w, target_h);
  for (int y = 0; y < mask.height; ++y) {
    const int ty = std::min(
        target_h - 1,
        static_cast<int>(static_cast<int64_t>(y) * target_h / mask.height));
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      const int tx = std::min(
          target_w - 1,
          static_cast<int>(static_cast<int64_t>(x) * target_w / mask.width));
      out.at(tx, ty) = 1;
    }
  }
  return out;
}

Tensor apply_mask(const Tensor& features, const BinaryMask& mask) {
  if (features.dims.size() != 3) {
    throw_invalid("apply_mask expects a C x H x W feature map");
  }
  if (static_cast<int>(features.dims[1]) != mask.height ||
      static_cast<int>(features.dims[2]) != mask.width) {
    throw_invalid("mask size does not match the feature map");
  }
  Tensor out = features;
  const size_t plane = static_cast<size_t>(mask.width) * mask.height;
  for (uint32_t c = 0; c < features.dims[0]; ++c) {
    double* slice = out.values.data() + c * plane;
    for (size_t i = 0; i < plane; ++i) {
      if (!mask.bits[i]) slice[i] = 0.0;
    }
  }
  return out;
}

Tensor mask_to_tensor(const BinaryMask& mask) {
  Tensor t({static_cast<uint32_t>(mask.height),
            static_cast<uint32_t>(mask.width)});
  for (size_t i = 0; i < mask.bits.size(); ++i) {
    t.values[i] = mask.bits[i] ? 1.0 : 0.0;
  }
  return t;
}

BinaryMask mask_from_tensor(const Tensor& t) {
  if (t.dims.size() != 2) throw_invalid("mask tensor must be 2-D");
  BinaryMask mask(static_cast<int>(t.dims[1]), static_cast<int>(t.dims[0]));
  for (size_t i = 0; i < t.values.size(); ++i) {
    mask.bits[i] = t.values[i] != 0.0 ? 1 : 0;
  }
  return mask;
}

}  // namespace omniact::regionmask
