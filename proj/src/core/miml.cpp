#include "core/miml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/error.hpp"
#include "core/evalmetrics.hpp"

namespace omniact::miml {

namespace {

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// (1/r) log((1/N) sum exp(r * s_i)), max-shifted.
double lse_column(const Matrix& s, int col, double r) {
  double m = s.at(0, col);
  for (int i = 1; i < s.rows; ++i) m = std::max(m, s.at(i, col));
  double sum = 0.0;
  for (int i = 0; i < s.rows; ++i) {
    sum += std::exp(r * (s.at(i, col) - m));
  }
  return m + (std::log(sum) - std::log(static_cast<double>(s.rows))) / r;
}

// First index of the column maximum (ties break low, matching the
// subgradient routing rule).
int argmax_col(const Matrix& s, int col) {
  int best = 0;
  for (int i = 1; i < s.rows; ++i) {
    if (s.at(i, col) > s.at(best, col)) best = i;
  }
  return best;
}

}  // namespace

Aggregator aggregator_from_string(const std::string& s) {
  if (s == "avg") return Aggregator::avg;
  if (s == "max") return Aggregator::max;
  if (s == "lse") return Aggregator::lse;
  if (s == "attention") return Aggregator::attention;
  throw_invalid("unknown aggregator '" + s + "'");
}

std::string to_string(Aggregator a) {
  switch (a) {
    case Aggregator::avg: return "avg";
    case Aggregator::max: return "max";
    case Aggregator::lse: return "lse";
    case Aggregator::attention: return "attention";
  }
  return "?";
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "miml") return HeadKind::miml;
  if (s == "pool_avg") return HeadKind::pool_avg;
  if (s == "pool_max") return HeadKind::pool_max;
  throw_invalid("unknown head kind '" + s + "'");
}

std::string to_string(HeadKind k) {
  switch (k) {
    case HeadKind::miml: return "miml";
    case HeadKind::pool_avg: return "pool_avg";
    case HeadKind::pool_max: return "pool_max";
  }
  return "?";
}

void Hyperparams::validate() const {
  if (k < 1) throw_invalid("instance width k must be >= 1");
  if (!(lse_sharpness > 0.0)) throw_invalid("lse sharpness must be > 0");
  if (reg_weight < 0.0) throw_invalid("reg weight must be >= 0");
  if (lr < 0.0) throw_invalid("learning rate must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw_invalid("momentum must be in [0, 1)");
  }
  if (batch_size < 1) throw_invalid("batch size must be >= 1");
  if (epochs < 0) throw_invalid("epoch count must be >= 0");
  if (lr_halve_every < 1) throw_invalid("lr halving period must be >= 1");
}

MimlHead MimlHead::init(int n_classes, int feat_dim, bool with_attention,
                        Rng& rng) {
  if (n_classes < 1 || feat_dim < 1) {
    throw_invalid("head needs positive class count and feature dim");
  }
  MimlHead head;
  head.n_classes = n_classes;
  head.feat_dim = feat_dim;
  head.weights = Matrix(n_classes, feat_dim);
  head.bias.assign(n_classes, 0.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(feat_dim));
  for (int a = 0; a < n_classes; ++a) {
    for (int d = 0; d < feat_dim; ++d) {
      head.weights.at(a, d) = rng.uniform(-scale, scale);
    }
  }
  if (with_attention) {
    head.attn_weight.resize(feat_dim);
    for (int d = 0; d < feat_dim; ++d) {
      head.attn_weight[d] = rng.uniform(-scale, scale);
    }
    head.attn_bias = 0.0;
  }
  return head;
}

InstanceBatch split_instances(const Tensor& features, int k) {
  if (features.dims.size() != 3) {
    throw_invalid("split_instances expects a C x H x W feature map");
  }
  if (k < 1) throw_invalid("instance width k must be >= 1");
  const int d = static_cast<int>(features.dims[0]);
  const int h = static_cast<int>(features.dims[1]);
  const int w = static_cast<int>(features.dims[2]);
  const int n = (w + k - 1) / k;

  InstanceBatch batch;
  batch.n_instances = n;
  batch.feat_dim = d;
  batch.features = Matrix(n, d);
  const double denom = static_cast<double>(h) * k;  // padded cells included
  for (int j = 0; j < n; ++j) {
    const int col_end = std::min(w, (j + 1) * k);
    for (int c = 0; c < d; ++c) {
      double sum = 0.0;
      for (int row = 0; row < h; ++row) {
        for (int col = j * k; col < col_end; ++col) {
          sum += features.at3(c, row, col);
        }
      }
      batch.features.at(j, c) = sum / denom;
    }
  }
  return batch;
}

Matrix instance_scores(const InstanceBatch& batch, const MimlHead& head) {
  if (batch.feat_dim != head.feat_dim) {
    throw_invalid("instance feature dim does not match the head");
  }
  Matrix s(batch.n_instances, head.n_classes);
  for (int i = 0; i < batch.n_instances; ++i) {
    const double* x = batch.features.row(i);
    for (int a = 0; a < head.n_classes; ++a) {
      const double* w = head.weights.row(a);
      double acc = head.bias[a];
      for (int d = 0; d < head.feat_dim; ++d) acc += w[d] * x[d];
      s.at(i, a) = acc;
    }
  }
  return s;
}

std::vector<double> aggregate(const Matrix& scores, Aggregator mode,
                              double lse_sharpness,
                              std::span<const double> attention_weights) {
  if (scores.rows < 1) throw_invalid("cannot aggregate an empty batch");
  const int n = scores.rows;
  const int c = scores.cols;
  std::vector<double> out(c, 0.0);
  switch (mode) {
    case Aggregator::avg:
      for (int a = 0; a < c; ++a) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += scores.at(i, a);
        out[a] = sum / n;
      }
      break;
    case Aggregator::max:
      for (int a = 0; a < c; ++a) out[a] = scores.at(argmax_col(scores, a), a);
      break;
    case Aggregator::lse:
      if (!(lse_sharpness > 0.0)) throw_invalid("lse sharpness must be > 0");
      for (int a = 0; a < c; ++a) out[a] = lse_column(scores, a, lse_sharpness);
      break;
    case Aggregator::attention:
      if (static_cast<int>(attention_weights.size()) != n) {
        throw_invalid("attention weights must match the instance count");
      }
      for (int a = 0; a < c; ++a) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += attention_weights[i] * scores.at(i, a);
        out[a] = sum;
      }
      break;
  }
  return out;
}

double bce_loss(std::span<const double> bag_probs,
                std::span<const uint8_t> labels) {
  if (bag_probs.size() != labels.size()) {
    throw_invalid("probability/label length mismatch");
  }
  double loss = 0.0;
  for (size_t a = 0; a < bag_probs.size(); ++a) {
    const double p = std::clamp(bag_probs[a], 1e-12, 1.0 - 1e-12);
    loss -= labels[a] ? std::log(p) : std::log(1.0 - p);
  }
  return loss;
}

double bce_loss_from_scores(std::span<const double> bag_scores,
                            std::span<const uint8_t> labels) {
  if (bag_scores.size() != labels.size()) {
    throw_invalid("score/label length mismatch");
  }
  // -[y log sigmoid(s) + (1-y) log(1-sigmoid(s))]
  //   = y softplus(-s) + (1-y) softplus(s)
  double loss = 0.0;
  for (size_t a = 0; a < bag_scores.size(); ++a) {
    loss += labels[a] ? softplus(-bag_scores[a]) : softplus(bag_scores[a]);
  }
  return loss;
}

double sparsity_reg(const Matrix& instance_probs) {
  double total = 0.0;
  for (int i = 0; i < instance_probs.rows; ++i) {
    double sum = 0.0;
    double mx = instance_probs.at(i, 0);
    for (int a = 0; a < instance_probs.cols; ++a) {
      const double p = instance_probs.at(i, a);
      sum += p;
      mx = std::max(mx, p);
    }
    total += (sum - mx) / mx;  // sigmoid output, so mx > 0
  }
  return total;
}

namespace {

// Pools a feature map into the batch the given head kind scores. For
// pool_max the source cell of each channel maximum is recorded (first in
// row-major order) for gradient routing.
InstanceBatch pool_for_kind(const Tensor& features, const Hyperparams& hp,
                            std::vector<size_t>* maxpool_src) {
  if (features.dims.size() != 3) {
    throw_invalid("expected a C x H x W feature map");
  }
  if (hp.head_kind == HeadKind::miml) {
    return split_instances(features, hp.k);
  }
  const int d = static_cast<int>(features.dims[0]);
  const size_t plane =
      static_cast<size_t>(features.dims[1]) * features.dims[2];
  InstanceBatch batch;
  batch.n_instances = 1;
  batch.feat_dim = d;
  batch.features = Matrix(1, d);
  if (hp.head_kind == HeadKind::pool_avg) {
    for (int c = 0; c < d; ++c) {
      const double* slice = features.values.data() + c * plane;
      double sum = 0.0;
      for (size_t i = 0; i < plane; ++i) sum += slice[i];
      batch.features.at(0, c) = sum / static_cast<double>(plane);
    }
  } else {
    if (maxpool_src) maxpool_src->assign(d, 0);
    for (int c = 0; c < d; ++c) {
      const double* slice = features.values.data() + c * plane;
      size_t best = 0;
      for (size_t i = 1; i < plane; ++i) {
        if (slice[i] > slice[best]) best = i;
      }
      batch.features.at(0, c) = slice[best];
      if (maxpool_src) (*maxpool_src)[c] = best;
    }
  }
  return batch;
}

void softmax_inplace(std::vector<double>& v) {
  double m = v[0];
  for (double x : v) m = std::max(m, x);
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - m);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

Forward forward_from_batch(InstanceBatch batch, const MimlHead& head,
                           const Hyperparams& hp,
                           std::vector<size_t> maxpool_src) {
  Forward fwd;
  fwd.batch = std::move(batch);
  fwd.maxpool_src = std::move(maxpool_src);
  fwd.scores.instance_scores = instance_scores(fwd.batch, head);

  const bool attention =
      hp.head_kind == HeadKind::miml && hp.aggregator == Aggregator::attention;
  if (attention) {
    if (!head.has_attention()) {
      throw_invalid("attention aggregation needs a head with attention params");
    }
    fwd.attn_logits.resize(fwd.batch.n_instances);
    for (int i = 0; i < fwd.batch.n_instances; ++i) {
      const double* x = fwd.batch.features.row(i);
      double acc = head.attn_bias;
      for (int d = 0; d < head.feat_dim; ++d) acc += head.attn_weight[d] * x[d];
      fwd.attn_logits[i] = acc;
    }
    fwd.attn_dist = fwd.attn_logits;
    softmax_inplace(fwd.attn_dist);
  }

  const Aggregator agg =
      hp.head_kind == HeadKind::miml ? hp.aggregator : Aggregator::avg;
  fwd.scores.bag_scores = aggregate(fwd.scores.instance_scores, agg,
                                    hp.lse_sharpness, fwd.attn_dist);

  fwd.scores.bag_probs.resize(head.n_classes);
  for (int a = 0; a < head.n_classes; ++a) {
    fwd.scores.bag_probs[a] = sigmoid(fwd.scores.bag_scores[a]);
  }
  fwd.scores.instance_probs =
      Matrix(fwd.batch.n_instances, head.n_classes);
  for (int i = 0; i < fwd.batch.n_instances; ++i) {
    for (int a = 0; a < head.n_classes; ++a) {
      fwd.scores.instance_probs.at(i, a) =
          sigmoid(fwd.scores.instance_scores.at(i, a));
    }
  }
  return fwd;
}

}  // namespace

Forward forward(const Tensor& features, const MimlHead& head,
                const Hyperparams& hp) {
  if (static_cast<int>(features.dims.size()) == 3 &&
      static_cast<int>(features.dims[0]) != head.feat_dim) {
    throw_invalid("feature channel count does not match the head");
  }
  std::vector<size_t> maxpool_src;
  InstanceBatch batch = pool_for_kind(features, hp, &maxpool_src);
  Forward fwd =
      forward_from_batch(std::move(batch), head, hp, std::move(maxpool_src));
  fwd.feat_h = static_cast<int>(features.dims[1]);
  fwd.feat_w = static_cast<int>(features.dims[2]);
  return fwd;
}

double total_loss(const TrainSample& sample, const MimlHead& head,
                  const Hyperparams& hp) {
  const Forward fwd = forward(sample.features, head, hp);
  double loss = bce_loss_from_scores(fwd.scores.bag_scores, sample.labels);
  if (hp.head_kind == HeadKind::miml && hp.reg_weight > 0.0) {
    loss += hp.reg_weight * sparsity_reg(fwd.scores.instance_probs);
  }
  return loss;
}

Gradients backward(const Forward& fwd, const MimlHead& head,
                   const Hyperparams& hp,
                   std::span<const double> d_bag_scores, double reg_weight,
                   const Tensor* mask, bool want_feature_grad) {
  const int n = fwd.batch.n_instances;
  const int c = head.n_classes;
  const int d = head.feat_dim;
  if (static_cast<int>(d_bag_scores.size()) != c) {
    throw_invalid("upstream gradient length mismatch");
  }
  const Matrix& s = fwd.scores.instance_scores;
  Matrix d_s(n, c);
  std::vector<double> d_logit(n, 0.0);

  const Aggregator agg =
      hp.head_kind == HeadKind::miml ? hp.aggregator : Aggregator::avg;
  switch (agg) {
    case Aggregator::avg:
      for (int a = 0; a < c; ++a) {
        const double g = d_bag_scores[a] / n;
        for (int i = 0; i < n; ++i) d_s.at(i, a) = g;
      }
      break;
    case Aggregator::max:
      for (int a = 0; a < c; ++a) {
        d_s.at(argmax_col(s, a), a) = d_bag_scores[a];
      }
      break;
    case Aggregator::lse: {
      // d s^a / d s_i^a = exp(r s_i^a) / sum_j exp(r s_j^a)
      const double r = hp.lse_sharpness;
      for (int a = 0; a < c; ++a) {
        double m = s.at(0, a);
        for (int i = 1; i < n; ++i) m = std::max(m, s.at(i, a));
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
          d_s.at(i, a) = std::exp(r * (s.at(i, a) - m));
          sum += d_s.at(i, a);
        }
        for (int i = 0; i < n; ++i) {
          d_s.at(i, a) = d_bag_scores[a] * d_s.at(i, a) / sum;
        }
      }
      break;
    }
    case Aggregator::attention:
      for (int a = 0; a < c; ++a) {
        const double t = fwd.scores.bag_scores[a];
        for (int i = 0; i < n; ++i) {
          const double w = fwd.attn_dist[i];
          d_s.at(i, a) = d_bag_scores[a] * w;
          d_logit[i] += d_bag_scores[a] * w * (s.at(i, a) - t);
        }
      }
      break;
  }

  if (hp.head_kind == HeadKind::miml && reg_weight > 0.0) {
    const Matrix& q = fwd.scores.instance_probs;
    for (int i = 0; i < n; ++i) {
      int am = 0;
      double total = 0.0;
      for (int a = 0; a < c; ++a) {
        total += q.at(i, a);
        if (q.at(i, a) > q.at(i, am)) am = a;
      }
      const double mx = q.at(i, am);
      for (int a = 0; a < c; ++a) {
        const double d_q =
            a == am ? (mx - total) / (mx * mx) : 1.0 / mx;
        const double p = q.at(i, a);
        d_s.at(i, a) += reg_weight * d_q * p * (1.0 - p);
      }
    }
  }

  Gradients grad;
  grad.d_weights = Matrix(c, d);
  grad.d_bias.assign(c, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* x = fwd.batch.features.row(i);
    for (int a = 0; a < c; ++a) {
      const double g = d_s.at(i, a);
      if (g == 0.0) continue;
      double* wrow = grad.d_weights.row(a);
      for (int dd = 0; dd < d; ++dd) wrow[dd] += g * x[dd];
      grad.d_bias[a] += g;
    }
  }
  const bool attention = agg == Aggregator::attention;
  if (attention) {
    grad.d_attn_weight.assign(d, 0.0);
    for (int i = 0; i < n; ++i) {
      const double* x = fwd.batch.features.row(i);
      for (int dd = 0; dd < d; ++dd) {
        grad.d_attn_weight[dd] += d_logit[i] * x[dd];
      }
      grad.d_attn_bias += d_logit[i];
    }
  }

  if (want_feature_grad) {
    if (fwd.feat_h < 1 || fwd.feat_w < 1) {
      throw_invalid("forward pass did not record the feature map shape");
    }
    const int h = fwd.feat_h;
    const int w = fwd.feat_w;
    // dL/dX first, then spread through the pooling.
    Matrix d_x(n, d);
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < c; ++a) {
        const double g = d_s.at(i, a);
        if (g == 0.0) continue;
        const double* wrow = head.weights.row(a);
        double* xrow = d_x.row(i);
        for (int dd = 0; dd < d; ++dd) xrow[dd] += g * wrow[dd];
      }
      if (attention) {
        double* xrow = d_x.row(i);
        for (int dd = 0; dd < d; ++dd) {
          xrow[dd] += d_logit[i] * head.attn_weight[dd];
        }
      }
    }
    grad.d_features = Tensor({static_cast<uint32_t>(d),
                              static_cast<uint32_t>(h),
                              static_cast<uint32_t>(w)});
    const size_t plane = static_cast<size_t>(h) * w;
    if (hp.head_kind == HeadKind::miml) {
      const double denom = static_cast<double>(h) * hp.k;
      for (int j = 0; j < n; ++j) {
        const int col_end = std::min(w, (j + 1) * hp.k);
        for (int cc = 0; cc < d; ++cc) {
          const double g = d_x.at(j, cc) / denom;
          for (int row = 0; row < h; ++row) {
            for (int col = j * hp.k; col < col_end; ++col) {
              grad.d_features.at3(cc, row, col) = g;
            }
          }
        }
      }
    } else if (hp.head_kind == HeadKind::pool_avg) {
      for (int cc = 0; cc < d; ++cc) {
        const double g = d_x.at(0, cc) / static_cast<double>(plane);
        double* slice = grad.d_features.values.data() + cc * plane;
        std::fill(slice, slice + plane, g);
      }
    } else {
      for (int cc = 0; cc < d; ++cc) {
        grad.d_features.values[cc * plane + fwd.maxpool_src[cc]] =
            d_x.at(0, cc);
      }
    }
    if (mask != nullptr && !mask->empty()) {
      for (int cc = 0; cc < d; ++cc) {
        double* slice = grad.d_features.values.data() + cc * plane;
        for (size_t i = 0; i < plane; ++i) {
          if (mask->values[i] == 0.0) slice[i] = 0.0;
        }
      }
    }
  }
  return grad;
}

Gradients loss_gradients(const TrainSample& sample, const MimlHead& head,
                         const Hyperparams& hp, bool want_feature_grad) {
  const Forward fwd = forward(sample.features, head, hp);
  std::vector<double> d_bag(head.n_classes);
  for (int a = 0; a < head.n_classes; ++a) {
    d_bag[a] = fwd.scores.bag_probs[a] - (sample.labels[a] ? 1.0 : 0.0);
  }
  const double reg =
      hp.head_kind == HeadKind::miml ? hp.reg_weight : 0.0;
  const Tensor* mask = sample.mask.empty() ? nullptr : &sample.mask;
  return backward(fwd, head, hp, d_bag, reg, mask, want_feature_grad);
}

TrainResult train(const std::vector<TrainSample>& dataset,
                  const Hyperparams& hp, uint64_t seed) {
  hp.validate();
  if (dataset.empty()) throw_invalid("cannot train on an empty dataset");
  const int c = static_cast<int>(dataset[0].labels.size());
  const int d = static_cast<int>(dataset[0].features.dims[0]);
  for (const TrainSample& s : dataset) {
    if (static_cast<int>(s.labels.size()) != c ||
        s.features.dims.size() != 3 ||
        static_cast<int>(s.features.dims[0]) != d) {
      throw_invalid("dataset samples disagree on class count or channels");
    }
  }

  Rng rng(seed);
  const bool attention =
      hp.head_kind == HeadKind::miml && hp.aggregator == Aggregator::attention;
  MimlHead head = MimlHead::init(c, d, attention, rng);

  // Pooling does not depend on the parameters, so do it once per sample.
  std::vector<InstanceBatch> pooled;
  pooled.reserve(dataset.size());
  for (const TrainSample& s : dataset) {
    pooled.push_back(pool_for_kind(s.features, hp, nullptr));
  }

  Matrix vel_w(c, d);
  std::vector<double> vel_b(c, 0.0);
  std::vector<double> vel_attn(attention ? d : 0, 0.0);
  double vel_attn_bias = 0.0;

  const int n = static_cast<int>(dataset.size());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  TrainResult result;
  result.metrics.reserve(hp.epochs);
  std::vector<double> d_bag(c);

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    const int halvings = epoch / hp.lr_halve_every;
    const double lr = hp.lr * std::pow(0.5, halvings);
    rng.shuffle(order);

    double epoch_bce = 0.0;
    double epoch_reg = 0.0;
    for (int start = 0; start < n; start += hp.batch_size) {
      const int end = std::min(n, start + hp.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);

      Matrix g_w(c, d);
      std::vector<double> g_b(c, 0.0);
      std::vector<double> g_attn(attention ? d : 0, 0.0);
      double g_attn_bias = 0.0;

      for (int pos = start; pos < end; ++pos) {
        const int idx = order[pos];
        const TrainSample& sample = dataset[idx];
        Forward fwd = forward_from_batch(pooled[idx], head, hp, {});
        epoch_bce += bce_loss_from_scores(fwd.scores.bag_scores, sample.labels);
        if (hp.head_kind == HeadKind::miml && hp.reg_weight > 0.0) {
          epoch_reg += sparsity_reg(fwd.scores.instance_probs);
        }
        for (int a = 0; a < c; ++a) {
          d_bag[a] = fwd.scores.bag_probs[a] - (sample.labels[a] ? 1.0 : 0.0);
        }
        const double reg =
            hp.head_kind == HeadKind::miml ? hp.reg_weight : 0.0;
        Gradients g = backward(fwd, head, hp, d_bag, reg, nullptr, false);
        for (size_t i = 0; i < g_w.v.size(); ++i) g_w.v[i] += g.d_weights.v[i];
        for (int a = 0; a < c; ++a) g_b[a] += g.d_bias[a];
        if (attention) {
          for (int dd = 0; dd < d; ++dd) g_attn[dd] += g.d_attn_weight[dd];
          g_attn_bias += g.d_attn_bias;
        }
      }

      for (size_t i = 0; i < vel_w.v.size(); ++i) {
        vel_w.v[i] = hp.momentum * vel_w.v[i] - lr * g_w.v[i] * inv_batch;
        head.weights.v[i] += vel_w.v[i];
      }
      for (int a = 0; a < c; ++a) {
        vel_b[a] = hp.momentum * vel_b[a] - lr * g_b[a] * inv_batch;
        head.bias[a] += vel_b[a];
      }
      if (attention) {
        for (int dd = 0; dd < d; ++dd) {
          vel_attn[dd] =
              hp.momentum * vel_attn[dd] - lr * g_attn[dd] * inv_batch;
          head.attn_weight[dd] += vel_attn[dd];
        }
        vel_attn_bias =
            hp.momentum * vel_attn_bias - lr * g_attn_bias * inv_batch;
        head.attn_bias += vel_attn_bias;
      }
    }

    // Post-epoch training mAP with the updated parameters.
    Matrix all_scores(n, c);
    for (int i = 0; i < n; ++i) {
      Forward fwd = forward_from_batch(pooled[i], head, hp, {});
      for (int a = 0; a < c; ++a) {
        all_scores.at(i, a) = fwd.scores.bag_scores[a];
      }
    }
    std::vector<std::vector<uint8_t>> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = dataset[i].labels;
    const std::vector<double> aps =
        evalmetrics::per_class_ap(all_scores, labels);

    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    m.loss_bce = epoch_bce / n;
    m.loss_reg = epoch_reg / n;
    // All-negative training labels leave mAP undefined; record NaN rather
    // than aborting the run.
    bool any_defined = false;
    for (double ap : aps) any_defined = any_defined || !std::isnan(ap);
    m.train_map = any_defined ? evalmetrics::mean_ap(aps)
                              : std::numeric_limits<double>::quiet_NaN();
    result.metrics.push_back(m);
  }

  result.head = std::move(head);
  return result;
}

Scores predict(const TrainSample& sample, const MimlHead& head,
               const Hyperparams& hp) {
  return forward(sample.features, head, hp).scores;
}

std::vector<int> predicted_classes(std::span<const double> bag_probs) {
  std::vector<int> out;
  for (size_t a = 0; a < bag_probs.size(); ++a) {
    if (bag_probs[a] > 0.5) out.push_back(static_cast<int>(a));
  }
  return out;
}

void save_head(const MimlHead& head, const std::string& path) {
  const int rows = head.n_classes + (head.has_attention() ? 1 : 0);
  Tensor t({static_cast<uint32_t>(rows),
            static_cast<uint32_t>(head.feat_dim + 1)});
  for (int a = 0; a < head.n_classes; ++a) {
    for (int d = 0; d < head.feat_dim; ++d) {
      t.at2(a, d) = head.weights.at(a, d);
    }
    t.at2(a, head.feat_dim) = head.bias[a];
  }
  if (head.has_attention()) {
    for (int d = 0; d < head.feat_dim; ++d) {
      t.at2(head.n_classes, d) = head.attn_weight[d];
    }
    t.at2(head.n_classes, head.feat_dim) = head.attn_bias;
  }
  write_tensor(t, path);
}

MimlHead load_head(const std::string& path, int n_classes, int feat_dim,
                   bool with_attention) {
  const Tensor t = read_tensor(path);
  const int rows = n_classes + (with_attention ? 1 : 0);
  if (t.dims.size() != 2 || static_cast<int>(t.dims[0]) != rows ||
      static_cast<int>(t.dims[1]) != feat_dim + 1) {
    throw_invalid(path + ": head shape does not match " +
                  std::to_string(n_classes) + " classes x " +
                  std::to_string(feat_dim) + " features" +
                  (with_attention ? " with attention" : ""));
  }
  MimlHead head;
  head.n_classes = n_classes;
  head.feat_dim = feat_dim;
  head.weights = Matrix(n_classes, feat_dim);
  head.bias.assign(n_classes, 0.0);
  for (int a = 0; a < n_classes; ++a) {
    for (int d = 0; d < feat_dim; ++d) head.weights.at(a, d) = t.at2(a, d);
    head.bias[a] = t.at2(a, feat_dim);
  }
  if (with_attention) {
    head.attn_weight.resize(feat_dim);
    for (int d = 0; d < feat_dim; ++d) {
      head.attn_weight[d] = t.at2(n_classes, d);
    }
    head.attn_bias = t.at2(n_classes, feat_dim);
  }
  return head;
}

}  // namespace omniact::miml
