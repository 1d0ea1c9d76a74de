// Multi-head scaled dot-product cross-attention.
#pragma once

#include <string>
#include <vector>

#include "scenecode/nn/layers.hpp"

namespace scenecode::nn {

struct AttentionCache {
  bool filled{false};
  LinearCache q_proj, k_proj, v_proj, out_proj;
  Matrix q, k, v;
  /// Per-head attention weights, N_q x N_k each.
  std::vector<Matrix> weights;
  std::vector<bool> key_mask;
};

struct AttentionGrads {
  Matrix dq;
  Matrix dk;
  Matrix dv;
};

/// Queries have `model_dim` columns; keys and values have `kv_dim`. The
/// output has `model_dim` columns.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& store, const std::string& name, int model_dim, int kv_dim, int heads,
                     Rng& rng);

  /// `key_mask[j] == false` excludes key j. An empty mask keeps every key.
  Matrix forward(const Matrix& q, const Matrix& k, const Matrix& v, const std::vector<bool>& key_mask,
                 AttentionCache* cache) const;
  AttentionGrads backward(const AttentionCache& cache, const Matrix& dy) const;

  [[nodiscard]] int heads() const { return heads_; }
  [[nodiscard]] int model_dim() const { return model_dim_; }

 private:
  Linear wq_, wk_, wv_, wo_;
  int model_dim_{0};
  int heads_{1};
};

}  // namespace scenecode::nn
