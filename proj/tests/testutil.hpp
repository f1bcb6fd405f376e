#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "core/matrix.hpp"
#include "core/miml.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace testutil {

/// Scratch directory removed on destruction.
class TempDir {
public:
  TempDir() {
    auto pattern = (std::filesystem::temp_directory_path() / "omniact_XXXXXX")
                       .string();
    std::vector<char> buf(pattern.begin(), pattern.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
    path_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return path_ + "/" + name; }
  const std::string& path() const { return path_; }

private:
  std::string path_;
};

// ---- independent oracles (no shared code with the implementations) ----

/// Plain triple-loop fc scoring.
inline omniact::Matrix naive_scores(const omniact::Matrix& feats,
                                    const omniact::Matrix& weights,
                                    const std::vector<double>& bias) {
  omniact::Matrix s(feats.rows, weights.rows);
  for (int i = 0; i < feats.rows; ++i) {
    for (int a = 0; a < weights.rows; ++a) {
      double acc = 0.0;
      for (int d = 0; d < feats.cols; ++d) {
        acc += feats.at(i, d) * weights.at(a, d);
      }
      s.at(i, a) = acc + bias[a];
    }
  }
  return s;
}

/// Straight-line LSE without the max shift (fine at test magnitudes).
inline double lse_direct(const std::vector<double>& vals, double r) {
  double sum = 0.0;
  for (double v : vals) sum += std::exp(r * v);
  return std::log(sum / static_cast<double>(vals.size())) / r;
}

inline double sigmoid_direct(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// O(n^2) average precision: for each positive, count items ranked
/// strictly before it (higher score, or equal score and earlier input
/// position) without any sorting.
inline double ap_bruteforce(const std::vector<double>& scores,
                            const std::vector<uint8_t>& labels) {
  const size_t n = scores.size();
  double ap = 0.0;
  size_t positives = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!labels[i]) continue;
    ++positives;
    size_t before = 0;      // items ranked ahead of i
    size_t pos_before = 0;  // positives among them
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const bool ahead =
          scores[j] > scores[i] || (scores[j] == scores[i] && j < i);
      if (ahead) {
        ++before;
        if (labels[j]) ++pos_before;
      }
    }
    ap += static_cast<double>(pos_before + 1) /
          static_cast<double>(before + 1);
  }
  return ap / static_cast<double>(positives);
}

/// Central finite differences of total_loss over every head parameter.
inline omniact::miml::Gradients fd_gradients(
    const omniact::miml::TrainSample& sample, omniact::miml::MimlHead head,
    const omniact::miml::Hyperparams& hp, double step = 1e-5) {
  using omniact::miml::total_loss;
  omniact::miml::Gradients g;
  g.d_weights = omniact::Matrix(head.n_classes, head.feat_dim);
  g.d_bias.assign(head.n_classes, 0.0);
  auto central = [&](double* param) {
    const double saved = *param;
    *param = saved + step;
    const double hi = total_loss(sample, head, hp);
    *param = saved - step;
    const double lo = total_loss(sample, head, hp);
    *param = saved;
    return (hi - lo) / (2.0 * step);
  };
  for (size_t i = 0; i < head.weights.v.size(); ++i) {
    g.d_weights.v[i] = central(&head.weights.v[i]);
  }
  for (int a = 0; a < head.n_classes; ++a) {
    g.d_bias[a] = central(&head.bias[a]);
  }
  if (head.has_attention()) {
    g.d_attn_weight.assign(head.feat_dim, 0.0);
    for (int d = 0; d < head.feat_dim; ++d) {
      g.d_attn_weight[d] = central(&head.attn_weight[d]);
    }
    g.d_attn_bias = central(&head.attn_bias);
  }
  return g;
}

/// || a - b || / max(||a||, tiny) over all parameter gradients.
inline double grad_rel_error(const omniact::miml::Gradients& a,
                             const omniact::miml::Gradients& b) {
  double diff = 0.0, norm = 0.0;
  auto acc = [&](double x, double y) {
    diff += (x - y) * (x - y);
    norm += x * x;
  };
  for (size_t i = 0; i < a.d_weights.v.size(); ++i) {
    acc(a.d_weights.v[i], b.d_weights.v[i]);
  }
  for (size_t i = 0; i < a.d_bias.size(); ++i) acc(a.d_bias[i], b.d_bias[i]);
  for (size_t i = 0; i < a.d_attn_weight.size(); ++i) {
    acc(a.d_attn_weight[i], b.d_attn_weight[i]);
  }
  if (!a.d_attn_weight.empty()) acc(a.d_attn_bias, b.d_attn_bias);
  return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
}

inline omniact::Tensor random_feature_map(int channels, int h, int w,
                                          omniact::Rng& rng,
                                          double scale = 1.0) {
  omniact::Tensor t({static_cast<uint32_t>(channels),
                     static_cast<uint32_t>(h), static_cast<uint32_t>(w)});
  for (double& v : t.values) v = scale * rng.normal();
  return t;
}

inline omniact::miml::MimlHead random_head(int n_classes, int feat_dim,
                                           bool attention, omniact::Rng& rng) {
  auto head = omniact::miml::MimlHead::init(n_classes, feat_dim, attention,
                                            rng);
  for (int a = 0; a < n_classes; ++a) head.bias[a] = 0.3 * rng.normal();
  if (attention) head.attn_bias = 0.3 * rng.normal();
  return head;
}

}  // namespace testutil
