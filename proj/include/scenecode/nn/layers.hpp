// Dense layers with explicit forward caches and reverse-mode backward passes.
// Backward calls accumulate into the parameter gradient buffers and return
// the gradient with respect to the layer input.
#pragma once

#include <string>
#include <vector>

#include "scenecode/nn/param_store.hpp"

namespace scenecode::nn {

/// Sinusoidal encoding of integer codes: every value v becomes
/// [sin(v / 10000^(k/K)), cos(v / 10000^(k/K))] for k = 0..K-1, and the pairs
/// of all columns are concatenated, giving rows x (cols * 2K).
Matrix positional_encode(const Eigen::MatrixXi& codes, int frequency_pairs);

struct LinearCache {
  bool filled{false};
  Matrix input;
};

/// y = x W + b with W of shape in x out.
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng);

  Matrix forward(const Matrix& x, LinearCache* cache) const;
  Matrix backward(const LinearCache& cache, const Matrix& dy) const;

  [[nodiscard]] int in_dim() const { return in_; }
  [[nodiscard]] int out_dim() const { return out_; }
  [[nodiscard]] Param& weight() const { return *weight_; }
  [[nodiscard]] Param& bias() const { return *bias_; }

 private:
  Param* weight_{nullptr};
  Param* bias_{nullptr};
  int in_{0};
  int out_{0};
};

/// x * sigmoid(x); smooth, so finite-difference checks never straddle a kink.
Matrix silu(const Matrix& x);
Matrix silu_backward(const Matrix& x, const Matrix& dy);
double sigmoid(double x);

struct MlpCache {
  bool filled{false};
  std::vector<LinearCache> linear;
  std::vector<Matrix> pre_activation;
};

/// Linear layers with SiLU between them and no activation after the last one.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore& store, const std::string& name, const std::vector<int>& dims, Rng& rng);

  Matrix forward(const Matrix& x, MlpCache* cache) const;
  Matrix backward(const MlpCache& cache, const Matrix& dy) const;

  [[nodiscard]] int in_dim() const { return layers_.front().in_dim(); }
  [[nodiscard]] int out_dim() const { return layers_.back().out_dim(); }
  [[nodiscard]] const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<Linear> layers_;
};

struct LayerNormCache {
  bool filled{false};
  Matrix normalized;
  Eigen::VectorXd inv_std;
};

/// Row-wise layer normalization with learned scale and shift.
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& name, int dim, Rng& rng);

  Matrix forward(const Matrix& x, LayerNormCache* cache) const;
  Matrix backward(const LayerNormCache& cache, const Matrix& dy) const;

 private:
  Param* gamma_{nullptr};
  Param* beta_{nullptr};
  double eps_{1e-5};
};

}  // namespace scenecode::nn
