#include "scenecode/nn/mcg.hpp"

namespace scenecode::nn {

McgBlock::McgBlock(ParamStore& store, const std::string& name, int in_dim, int dim, Rng& rng)
    : mlp_(store, name + ".mlp", {in_dim, dim, dim}, rng), gate_(store, name + ".gate", dim, dim, rng) {}

McgOutput McgBlock::forward(const Matrix& elements, const RowVector& context, const std::vector<bool>& mask,
                            McgBlockCache* cache) const {
  McgBlockCache local;
  McgBlockCache& c = cache ? *cache : local;
  c.mlp_out = mlp_.forward(elements, &c.mlp);
  const Matrix logits = gate_.forward(Matrix(context), &c.gate_linear);
  c.gate = logits.row(0).unaryExpr([](double v) { return sigmoid(v); });

  McgOutput out;
  out.elements = c.mlp_out.array().rowwise() * c.gate.array();
  const Eigen::Index dim = out.elements.cols();
  out.context = RowVector::Zero(dim);
  c.argmax.assign(dim, -1);
  for (Eigen::Index r = 0; r < out.elements.rows(); ++r) {
    if (!mask.empty() && !mask[r]) continue;
    for (Eigen::Index f = 0; f < dim; ++f) {
      if (c.argmax[f] < 0 || out.elements(r, f) > out.context(f)) {
        out.context(f) = out.elements(r, f);
        c.argmax[f] = r;
      }
    }
  }
  c.filled = true;
  return out;
}

std::pair<Matrix, RowVector> McgBlock::backward(const McgBlockCache& c, const Matrix& d_elements,
                                                const RowVector& d_context) const {
  if (!c.filled) throw MissingCacheError("mcg block: backward called without a forward cache");
  Matrix d_out = d_elements;
  for (Eigen::Index f = 0; f < d_context.size(); ++f) {
    if (c.argmax[f] >= 0) d_out(c.argmax[f], f) += d_context(f);
  }
  const Matrix d_mlp = d_out.array().rowwise() * c.gate.array();
  const RowVector d_gate = (d_out.array() * c.mlp_out.array()).colwise().sum().matrix();
  const RowVector d_logits = d_gate.array() * c.gate.array() * (1.0 - c.gate.array());
  const Matrix d_context_in = gate_.backward(c.gate_linear, Matrix(d_logits));
  return {mlp_.backward(c.mlp, d_mlp), d_context_in.row(0)};
}

McgStack::McgStack(ParamStore& store, const std::string& name, int in_dim, int dim, int layers, Rng& rng)
    : dim_(dim) {
  if (layers < 1) throw ShapeError("mcg stack '" + name + "' needs at least one block");
  for (int l = 0; l < layers; ++l) {
    blocks_.emplace_back(store, name + ".b" + std::to_string(l), l == 0 ? in_dim : dim, dim, rng);
  }
}

McgOutput McgStack::forward(const Matrix& elements, const std::vector<bool>& mask, McgStackCache* cache) const {
  if (cache) {
    cache->blocks.assign(blocks_.size(), {});
    cache->filled = true;
  }
  McgOutput state{elements, RowVector::Zero(dim_)};
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    state = blocks_[b].forward(state.elements, state.context, mask, cache ? &cache->blocks[b] : nullptr);
  }
  return state;
}

Matrix McgStack::backward(const McgStackCache& cache, const Matrix& d_elements, const RowVector& d_context) const {
  if (!cache.filled) throw MissingCacheError("mcg stack: backward called without a forward cache");
  Matrix de = d_elements;
  RowVector dc = d_context;
  for (std::size_t b = blocks_.size(); b-- > 0;) {
    auto [e, c] = blocks_[b].backward(cache.blocks[b], de, dc);
    de = std::move(e);
    dc = std::move(c);
  }
  return de;
}

}  // namespace scenecode::nn
