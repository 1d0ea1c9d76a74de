// Multi-context gating: a permutation-equivariant set encoder.
//
// One block maps elements e_i and a context vector c to
//   e_i' = MLP(e_i) * sigmoid(W_c c + b_c)      (elementwise)
//   c'   = max over valid i of e_i'             (per feature)
// Blocks are stacked; the first context is the zero vector.
#pragma once

#include <string>
#include <vector>

#include "scenecode/nn/layers.hpp"

namespace scenecode::nn {

struct McgBlockCache {
  bool filled{false};
  MlpCache mlp;
  LinearCache gate_linear;
  Matrix mlp_out;
  RowVector gate;
  /// Row that produced the pooled maximum per feature, -1 when no row is valid.
  std::vector<Eigen::Index> argmax;
};

struct McgOutput {
  Matrix elements;
  RowVector context;
};

class McgBlock {
 public:
  McgBlock() = default;
  McgBlock(ParamStore& store, const std::string& name, int in_dim, int dim, Rng& rng);

  McgOutput forward(const Matrix& elements, const RowVector& context, const std::vector<bool>& mask,
                    McgBlockCache* cache) const;
  /// Returns the gradients with respect to the input elements and context.
  std::pair<Matrix, RowVector> backward(const McgBlockCache& cache, const Matrix& d_elements,
                                        const RowVector& d_context) const;

  [[nodiscard]] const Mlp& mlp() const { return mlp_; }
  [[nodiscard]] const Linear& gate() const { return gate_; }

 private:
  Mlp mlp_;
  Linear gate_;
};

struct McgStackCache {
  bool filled{false};
  std::vector<McgBlockCache> blocks;
};

class McgStack {
 public:
  McgStack() = default;
  McgStack(ParamStore& store, const std::string& name, int in_dim, int dim, int layers, Rng& rng);

  /// `mask[i] == false` rows are still transformed but never pooled. An
  /// empty mask keeps every row.
  McgOutput forward(const Matrix& elements, const std::vector<bool>& mask, McgStackCache* cache) const;
  Matrix backward(const McgStackCache& cache, const Matrix& d_elements, const RowVector& d_context) const;

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] const std::vector<McgBlock>& blocks() const { return blocks_; }

 private:
  std::vector<McgBlock> blocks_;
  int dim_{0};
};

}  // namespace scenecode::nn
