#include "core/localize.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace omniact::localize {

Tensor feature_gradients(const miml::TrainSample& sample,
                         const miml::MimlHead& head,
                         const miml::Hyperparams& hp, int class_index) {
  if (class_index < 0 || class_index >= head.n_classes) {
    throw_invalid("class index out of range");
  }
  const miml::Forward fwd = miml::forward(sample.features, head, hp);
  // d p^a / d s^a = p (1 - p); other classes contribute nothing.
  std::vector<double> d_bag(head.n_classes, 0.0);
  const double p = fwd.scores.bag_probs[class_index];
  d_bag[class_index] = p * (1.0 - p);
  const Tensor* mask = sample.mask.empty() ? nullptr : &sample.mask;
  miml::Gradients grad =
      miml::backward(fwd, head, hp, d_bag, 0.0, mask, true);
  return std::move(grad.d_features);
}

std::vector<double> channel_weights(const Tensor& grads) {
  if (grads.dims.size() != 3) {
    throw_invalid("channel weights expect a C x H x W gradient tensor");
  }
  const size_t plane = static_cast<size_t>(grads.dims[1]) * grads.dims[2];
  std::vector<double> weights(grads.dims[0], 0.0);
  for (uint32_t c = 0; c < grads.dims[0]; ++c) {
    const double* slice = grads.values.data() + c * plane;
    double sum = 0.0;
    for (size_t i = 0; i < plane; ++i) sum += slice[i];
    weights[c] = sum / static_cast<double>(plane);
  }
  return weights;
}

Tensor gradcam(const Tensor& features, const std::vector<double>& weights) {
  if (features.dims.size() != 3) {
    throw_invalid("gradcam expects a C x H x W feature map");
  }
  if (weights.size() != features.dims[0]) {
    throw_invalid("channel weight count does not match the feature map");
  }
  Tensor heat({features.dims[1], features.dims[2]});
  const size_t plane = heat.size();
  for (uint32_t c = 0; c < features.dims[0]; ++c) {
    const double w = weights[c];
    if (w == 0.0) continue;
    const double* slice = features.values.data() + c * plane;
    for (size_t i = 0; i < plane; ++i) heat.values[i] += w * slice[i];
  }
  for (double& v : heat.values) v = std::max(v, 0.0);
  return heat;
}

Tensor upsample_heatmap(const Tensor& heatmap, int out_w, int out_h) {
  if (heatmap.dims.size() != 2) throw_invalid("heatmap must be 2-D");
  const int src_h = static_cast<int>(heatmap.dims[0]);
  const int src_w = static_cast<int>(heatmap.dims[1]);
  if (out_w < src_w || out_h < src_h) {
    throw_invalid("upsample target must be at least the source size");
  }
  Tensor out({static_cast<uint32_t>(out_h), static_cast<uint32_t>(out_w)});
  const double sx = static_cast<double>(src_w) / out_w;
  const double sy = static_cast<double>(src_h) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double v = (y + 0.5) * sy - 0.5;
    const int y0 = static_cast<int>(std::floor(v));
    const double ty = v - y0;
    const int ya = std::clamp(y0, 0, src_h - 1);
    const int yb = std::clamp(y0 + 1, 0, src_h - 1);
    for (int x = 0; x < out_w; ++x) {
      const double u = (x + 0.5) * sx - 0.5;
      const int x0 = static_cast<int>(std::floor(u));
      const double tx = u - x0;
      const int xa = std::clamp(x0, 0, src_w - 1);
      const int xb = std::clamp(x0 + 1, 0, src_w - 1);
      const double top =
          (1.0 - tx) * heatmap.at2(ya, xa) + tx * heatmap.at2(ya, xb);
      const double bot =
          (1.0 - tx) * heatmap.at2(yb, xa) + tx * heatmap.at2(yb, xb);
      out.at2(y, x) = (1.0 - ty) * top + ty * bot;
    }
  }
  return out;
}

namespace {

double heat_max(const Tensor& heatmap) {
  double mx = 0.0;
  for (double v : heatmap.values) mx = std::max(mx, v);
  return mx;
}

}  // namespace

Image render_heatmap(const Tensor& heatmap) {
  if (heatmap.dims.size() != 2) throw_invalid("heatmap must be 2-D");
  Image img(static_cast<int>(heatmap.dims[1]),
            static_cast<int>(heatmap.dims[0]), 1);
  const double mx = heat_max(heatmap);
  if (mx <= 0.0) return img;  // all black
  for (size_t i = 0; i < heatmap.values.size(); ++i) {
    const double v = std::max(heatmap.values[i], 0.0) / mx;
    img.pixels[i] = static_cast<uint8_t>(std::lround(255.0 * v));
  }
  return img;
}

Image overlay_heatmap(const Tensor& heatmap, const Image& panorama) {
  if (heatmap.dims.size() != 2) throw_invalid("heatmap must be 2-D");
  if (panorama.channels != 3) throw_invalid("overlay needs an RGB panorama");
  if (static_cast<int>(heatmap.dims[1]) != panorama.width ||
      static_cast<int>(heatmap.dims[0]) != panorama.height) {
    throw_invalid("heatmap and panorama sizes differ; upsample first");
  }
  const double mx = heat_max(heatmap);
  Image out = panorama;
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const double v =
          mx > 0.0 ? std::max(heatmap.at2(y, x), 0.0) / mx : 0.0;
      const double heat_r = 255.0 * v;
      const double heat_b = 255.0 * (1.0 - v);
      out.at(x, y, 0) = static_cast<uint8_t>(
          std::lround(0.5 * panorama.at(x, y, 0) + 0.5 * heat_r));
      out.at(x, y, 1) = static_cast<uint8_t>(0.5 * panorama.at(x, y, 1));
      out.at(x, y, 2) = static_cast<uint8_t>(
          std::lround(0.5 * panorama.at(x, y, 2) + 0.5 * heat_b));
    }
  }
  return out;
}

int argmax_column(const Tensor& heatmap) {
  if (heatmap.dims.size() != 2 || heatmap.empty()) {
    throw_invalid("heatmap must be a non-empty 2-D tensor");
  }
  size_t best = 0;
  for (size_t i = 1; i < heatmap.values.size(); ++i) {
    if (heatmap.values[i] > heatmap.values[best]) best = i;
  }
  return static_cast<int>(best % heatmap.dims[1]);
}

}  // namespace omniact::localize
