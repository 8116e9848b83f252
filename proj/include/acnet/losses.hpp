#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "acnet/ops.hpp"
#include "acnet/rng.hpp"
#include "acnet/tensor.hpp"

namespace acnet {

enum class GanLossVariant { kNonSaturating, kMinimax };

template <typename T>
struct LossWeights {
  T lambda = T(10);
  T gamma = T(0.1);
  T triplet_margin = T(0.2);
};

// One learnable proxy vector per training class. Rows live on the autodiff
// graph as a single [n_classes, dim] parameter; renormalize() projects them
// back onto the unit sphere after an optimizer step.
template <typename T>
class ProxyBank {
 public:
  ProxyBank() = default;

  ProxyBank(const std::vector<int>& class_labels, int dim, T temperature, Rng& rng)
      : temperature_(temperature) {
    if (class_labels.empty()) throw std::invalid_argument("proxy bank: no classes");
    if (temperature <= T(0)) throw std::invalid_argument("proxy bank: temperature must be > 0");
    proxies_ = Tensor<T>::randn({static_cast<int>(class_labels.size()), dim}, rng,
                                T(1), /*requires_grad=*/true);
    for (size_t i = 0; i < class_labels.size(); ++i) {
      class_to_row_[class_labels[i]] = static_cast<int>(i);
    }
    renormalize();
  }

  int row(int label) const {
    auto it = class_to_row_.find(label);
    if (it == class_to_row_.end()) {
      throw std::out_of_range("proxy bank: unknown class label " + std::to_string(label));
    }
    return it->second;
  }

  void renormalize() {
    const int k = proxies_.dim(0), d = proxies_.dim(1);
    auto& v = proxies_.values();
    for (int r = 0; r < k; ++r) {
      T sq = T(0);
      for (int c = 0; c < d; ++c) sq += v[r * d + c] * v[r * d + c];
      const T norm = std::max(std::sqrt(sq), T(1e-12));
      for (int c = 0; c < d; ++c) v[r * d + c] /= norm;
    }
  }

  Tensor<T>& proxies() { return proxies_; }
  const Tensor<T>& proxies() const { return proxies_; }
  T temperature() const { return temperature_; }
  int n_classes() const { return proxies_.defined() ? proxies_.dim(0) : 0; }
  int dim() const { return proxies_.dim(1); }
  const std::unordered_map<int, int>& class_index() const { return class_to_row_; }

  // Labels in row order, for serialization.
  std::vector<int> labels_by_row() const {
    std::vector<int> out(class_to_row_.size());
    for (const auto& [label, row] : class_to_row_) out[row] = label;
    return out;
  }

 private:
  Tensor<T> proxies_;
  T temperature_ = T(0.05);
  std::unordered_map<int, int> class_to_row_;
};

// Discriminator objective: mean over patches of
// -log sigmoid(real) - log(1 - sigmoid(fake)), on logits.
template <typename T>
Tensor<T> adversarial_loss_d(const Tensor<T>& real_logits, const Tensor<T>& fake_logits) {
  detail::check_same_shape(real_logits, fake_logits, "adversarial_loss_d");
  return add(mean_all(softplus(neg(real_logits))), mean_all(softplus(fake_logits)));
}

// Generator objective. Non-saturating: mean of -log sigmoid(fake).
// Minimax: mean of log(1 - sigmoid(fake)), the literal game value.
template <typename T>
Tensor<T> adversarial_loss_g(const Tensor<T>& fake_logits,
                             GanLossVariant variant = GanLossVariant::kNonSaturating) {
  if (variant == GanLossVariant::kNonSaturating) {
    return mean_all(softplus(neg(fake_logits)));
  }
  return neg(mean_all(softplus(fake_logits)));
}

// Mean absolute difference over all elements.
template <typename T>
Tensor<T> identity_loss(const Tensor<T>& reconstructed, const Tensor<T>& photo) {
  detail::check_same_shape(reconstructed, photo, "identity_loss");
  return mean_all(abs(sub(reconstructed, photo)));
}

// Proxy softmax cross-entropy at temperature t, batch-meaned:
// -log( exp(x.p_y / t) / sum_z exp(x.p_z / t) ).
template <typename T>
Tensor<T> normsoftmax_loss(const Tensor<T>& embeddings, const std::vector<int>& labels,
                           const ProxyBank<T>& bank) {
  detail::check_rank(embeddings, 2, "normsoftmax_loss", "embeddings");
  if (static_cast<size_t>(embeddings.dim(0)) != labels.size()) {
    throw std::invalid_argument("normsoftmax_loss: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(embeddings.dim(0)) +
                                " embeddings");
  }
  const int batch = embeddings.dim(0);
  std::vector<int> rows(batch), cols(batch);
  for (int i = 0; i < batch; ++i) {
    rows[i] = i;
    cols[i] = bank.row(labels[i]);
  }
  Tensor<T> logits = scale(matmul_nt(embeddings, bank.proxies()),
                           T(1) / bank.temperature());
  Tensor<T> per_sample = sub(logsumexp_rows(logits), gather2d(logits, rows, cols));
  return mean_all(per_sample);
}

// Same objective applied to embeddings of synthesized images carrying the
// source sketch's label; gradients reach the generator through the encoder
// unless the caller detached the synthesized batch.
template <typename T>
Tensor<T> chainer_loss(const Tensor<T>& synth_embeddings, const std::vector<int>& labels,
                       const ProxyBank<T>& bank) {
  return normsoftmax_loss(synth_embeddings, labels, bank);
}

struct CombinedNormTerms {
  bool chainer = true;
  bool sketch = true;
  bool photo = true;
};

// Sum of the enabled proxy-softmax terms (synthesized, sketch, photo), each
// batch-meaned. Undefined tensors are allowed for disabled terms.
template <typename T>
Tensor<T> combined_normsoftmax(const Tensor<T>& sketch_emb, const Tensor<T>& synth_emb,
                               const Tensor<T>& photo_emb, const std::vector<int>& labels,
                               const ProxyBank<T>& bank,
                               const CombinedNormTerms& terms = {}) {
  Tensor<T> total;
  auto accumulate = [&](const Tensor<T>& emb) {
    Tensor<T> term = normsoftmax_loss(emb, labels, bank);
    total = total.defined() ? add(total, term) : term;
  };
  if (terms.chainer) accumulate(synth_emb);
  if (terms.sketch) accumulate(sketch_emb);
  if (terms.photo) accumulate(photo_emb);
  if (!total.defined()) return Tensor<T>::zeros({1});
  return total;
}

// L_adv + lambda * L_norm + gamma * L_ide. The discriminator term runs in
// its own optimization step and is not part of this sum.
template <typename T>
Tensor<T> total_objective(const Tensor<T>& adversarial_g, const Tensor<T>& combined_norm,
                          const Tensor<T>& identity, const LossWeights<T>& w) {
  if (w.lambda < T(0) || w.gamma < T(0)) {
    throw std::invalid_argument("total_objective: lambda and gamma must be >= 0");
  }
  Tensor<T> total = add(adversarial_g, scale(combined_norm, w.lambda));
  return add(total, scale(identity, w.gamma));
}

// Margin hinge on explicit triples: mean over the batch of
// max(0, |a-p|^2 - |a-n|^2 + margin).
template <typename T>
Tensor<T> triplet_hinge(const Tensor<T>& anchor, const Tensor<T>& positive,
                        const Tensor<T>& negative, T margin) {
  detail::check_same_shape(anchor, positive, "triplet_hinge");
  detail::check_same_shape(anchor, negative, "triplet_hinge");
  Tensor<T> dp = sub(anchor, positive);
  Tensor<T> dn = sub(anchor, negative);
  Tensor<T> d_ap = sum_rows(mul(dp, dp));
  Tensor<T> d_an = sum_rows(mul(dn, dn));
  return mean_all(relu(add_scalar(sub(d_ap, d_an), margin)));
}

// Batch-hard mining: per anchor, the farthest same-label embedding (self
// excluded) and the closest different-label embedding. Anchors lacking a
// positive or a negative are skipped; the loss is meaned over anchors that
// have both. Squared Euclidean distances via 2 - 2 * cosine on unit rows.
template <typename T>
Tensor<T> triplet_loss(const Tensor<T>& embeddings, const std::vector<int>& labels,
                       T margin) {
  detail::check_rank(embeddings, 2, "triplet_loss", "embeddings");
  const int batch = embeddings.dim(0);
  if (static_cast<size_t>(batch) != labels.size()) {
    throw std::invalid_argument("triplet_loss: label count mismatch");
  }
  Tensor<T> dist2 = add_scalar(scale(matmul_nt(embeddings, embeddings), T(-2)), T(2));
  const auto& d = dist2.values();
  std::vector<int> anchors, positives, negatives;
  for (int a = 0; a < batch; ++a) {
    int hardest_pos = -1, hardest_neg = -1;
    for (int j = 0; j < batch; ++j) {
      if (j == a) continue;
      const T dist = d[static_cast<size_t>(a) * batch + j];
      if (labels[j] == labels[a]) {
        if (hardest_pos < 0 || dist > d[static_cast<size_t>(a) * batch + hardest_pos]) {
          hardest_pos = j;
        }
      } else {
        if (hardest_neg < 0 || dist < d[static_cast<size_t>(a) * batch + hardest_neg]) {
          hardest_neg = j;
        }
      }
    }
    if (hardest_pos >= 0 && hardest_neg >= 0) {
      anchors.push_back(a);
      positives.push_back(hardest_pos);
      negatives.push_back(hardest_neg);
    }
  }
  if (anchors.empty()) return Tensor<T>::zeros({1});
  Tensor<T> d_ap = gather2d(dist2, anchors, positives);
  Tensor<T> d_an = gather2d(dist2, anchors, negatives);
  return mean_all(relu(add_scalar(sub(d_ap, d_an), margin)));
}

}  // namespace acnet
