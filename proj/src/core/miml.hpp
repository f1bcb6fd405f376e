#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/matrix.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace omniact::miml {

/// Instance-score aggregation rule.
enum class Aggregator { avg, max, lse, attention };

/// Model family: the MIML head over width-k instances, or the two
/// whole-map pooling baselines (pool the masked feature map into a single
/// vector, then one fc layer; no instances, no sparsity term).
enum class HeadKind { miml, pool_avg, pool_max };

Aggregator aggregator_from_string(const std::string& s);
std::string to_string(Aggregator a);
HeadKind head_kind_from_string(const std::string& s);
std::string to_string(HeadKind k);

struct Hyperparams {
  int k = 8;
  double lse_sharpness = 0.8;  // r in the LSE aggregation
  double reg_weight = 0.001;   // alpha on the sparsity term
  double lr = 0.01;
  double momentum = 0.9;
  int batch_size = 32;
  int epochs = 50;
  int lr_halve_every = 10;
  Aggregator aggregator = Aggregator::lse;
  HeadKind head_kind = HeadKind::miml;

  void validate() const;
};

/// Width-k blocks of a feature map, spatially average-pooled: N x D rows.
struct InstanceBatch {
  int n_instances = 0;
  int feat_dim = 0;
  Matrix features;  // N x D
};

/// Shared fc scoring layer (plus the optional attention projection used by
/// the attention aggregation variant).
struct MimlHead {
  int n_classes = 0;
  int feat_dim = 0;
  Matrix weights;            // C x D
  std::vector<double> bias;  // C
  std::vector<double> attn_weight;  // D; empty when unused
  double attn_bias = 0.0;

  bool has_attention() const { return !attn_weight.empty(); }

  /// Weights ~ Uniform(-1/sqrt(D), 1/sqrt(D)) from the given generator,
  /// biases zero. Attention parameters are drawn after the fc weights.
  static MimlHead init(int n_classes, int feat_dim, bool with_attention,
                       Rng& rng);
};

/// One clip: (masked) feature map, bag labels, and the feature-resolution
/// mask when one was applied (kept so feature gradients can be zeroed on
/// masked-out cells).
struct TrainSample {
  Tensor features;              // C_feat x H x W
  Tensor mask;                  // H x W 0/1, or empty
  std::vector<uint8_t> labels;  // C
};

struct Scores {
  Matrix instance_scores;          // N x C
  Matrix instance_probs;           // N x C
  std::vector<double> bag_scores;  // C
  std::vector<double> bag_probs;   // C
};

/// Splits into N = ceil(W/k) width-k blocks (zero-padded past W) and
/// average-pools each block over its H x k cells; padding zeros stay in the
/// denominator.
InstanceBatch split_instances(const Tensor& features, int k);

/// s = features * weights^T + bias, one shared head across instances.
Matrix instance_scores(const InstanceBatch& batch, const MimlHead& head);

/// Per-class aggregate over instances. For the attention rule the caller
/// supplies the softmax distribution over instances (it is computed from
/// instance features, which plain scores do not carry).
std::vector<double> aggregate(const Matrix& scores, Aggregator mode,
                              double lse_sharpness,
                              std::span<const double> attention_weights = {});

/// Binary cross-entropy from probabilities (clamped to [1e-12, 1-1e-12]).
double bce_loss(std::span<const double> bag_probs,
                std::span<const uint8_t> labels);

/// Same loss evaluated in log space from scores; this is what the training
/// path uses.
double bce_loss_from_scores(std::span<const double> bag_scores,
                            std::span<const uint8_t> labels);

/// sum_i (sum_a p_i^a - max_a p_i^a) / max_a p_i^a.
double sparsity_reg(const Matrix& instance_probs);

/// Everything the backward pass needs from one forward evaluation.
struct Forward {
  InstanceBatch batch;
  Scores scores;
  std::vector<double> attn_logits;  // N, attention only
  std::vector<double> attn_dist;    // N, softmax of the logits
  std::vector<size_t> maxpool_src;  // flat cell per channel, pool_max only
  int feat_h = 0;  // source map shape, needed to spread feature gradients
  int feat_w = 0;
};

Forward forward(const Tensor& features, const MimlHead& head,
                const Hyperparams& hp);

/// bce + reg_weight * sparsity for the miml head; plain bce for the
/// pooling baselines.
double total_loss(const TrainSample& sample, const MimlHead& head,
                  const Hyperparams& hp);

struct Gradients {
  Matrix d_weights;            // C x D
  std::vector<double> d_bias;  // C
  std::vector<double> d_attn_weight;
  double d_attn_bias = 0.0;
  Tensor d_features;  // same shape as the sample's map; filled on request
};

/// Backpropagates d_bag_scores (dL/ds^a) through the head. reg_weight > 0
/// adds the sparsity term's gradient (miml head only). When
/// want_feature_grad is set, d_features carries dL/dA with masked-out cells
/// zeroed.
Gradients backward(const Forward& fwd, const MimlHead& head,
                   const Hyperparams& hp,
                   std::span<const double> d_bag_scores, double reg_weight,
                   const Tensor* mask, bool want_feature_grad);

/// Analytic gradient of total_loss at the current head.
Gradients loss_gradients(const TrainSample& sample, const MimlHead& head,
                         const Hyperparams& hp,
                         bool want_feature_grad = false);

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double loss_bce = 0.0;
  double loss_reg = 0.0;
  double train_map = 0.0;
};

struct TrainResult {
  MimlHead head;
  std::vector<EpochMetrics> metrics;
};

/// SGD with classic momentum (v = mu*v - lr*g, theta += v) over seeded
/// mini-batch shuffles; the learning rate is halved every lr_halve_every
/// epochs. Deterministic given the seed.
TrainResult train(const std::vector<TrainSample>& dataset,
                  const Hyperparams& hp, uint64_t seed);

Scores predict(const TrainSample& sample, const MimlHead& head,
               const Hyperparams& hp);

/// {a : p^a > 0.5}, strict.
std::vector<int> predicted_classes(std::span<const double> bag_probs);

/// Head file: a 2-D tensor of shape (C, D+1), each row the fc weights with
/// the bias in the last column; with attention parameters an extra
/// (D+1)-row [attn_weight, attn_bias] is appended.
void save_head(const MimlHead& head, const std::string& path);
MimlHead load_head(const std::string& path, int n_classes, int feat_dim,
                   bool with_attention);

}  // namespace omniact::miml
