#pragma once

#include <vector>

#include "core/image.hpp"
#include "core/miml.hpp"
#include "core/tensor.hpp"

namespace omniact::localize {

/// d p^a / d A for one class: the analytic chain through sigmoid,
/// aggregation, the fc layer and the pooling, zeroed on masked-out cells.
Tensor feature_gradients(const miml::TrainSample& sample,
                         const miml::MimlHead& head,
                         const miml::Hyperparams& hp, int class_index);

/// Per-channel spatial mean of the gradients (Z = H*W).
std::vector<double> channel_weights(const Tensor& grads);

/// ReLU of the weighted channel sum, at feature resolution.
Tensor gradcam(const Tensor& features, const std::vector<double>& weights);

/// Bilinear upsampling (align-corners false). Target must be at least as
/// large as the source in both axes.
Tensor upsample_heatmap(const Tensor& heatmap, int out_w, int out_h);

/// Grayscale rendering normalized by the heatmap's own maximum; an
/// all-zero map renders black.
Image render_heatmap(const Tensor& heatmap);

/// Fixed 0.5 alpha blend of a blue-to-red ramp over an RGB panorama.
Image overlay_heatmap(const Tensor& heatmap, const Image& panorama);

/// Column of the heatmap's maximum cell (row-major ties break low).
int argmax_column(const Tensor& heatmap);

}  // namespace omniact::localize
