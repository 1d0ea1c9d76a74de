#include "scenecode/nn/attention.hpp"

#include <cmath>
#include <limits>

namespace scenecode::nn {

MultiHeadAttention::MultiHeadAttention(ParamStore& store, const std::string& name, int model_dim, int kv_dim,
                                       int heads, Rng& rng)
    : wq_(store, name + ".q", model_dim, model_dim, rng),
      wk_(store, name + ".k", kv_dim, model_dim, rng),
      wv_(store, name + ".v", kv_dim, model_dim, rng),
      wo_(store, name + ".out", model_dim, model_dim, rng),
      model_dim_(model_dim),
      heads_(heads) {
  if (heads < 1 || model_dim % heads != 0) {
    throw ShapeError("attention '" + name + "': model dim " + std::to_string(model_dim) +
                     " not divisible by " + std::to_string(heads) + " heads");
  }
}

Matrix MultiHeadAttention::forward(const Matrix& q_in, const Matrix& k_in, const Matrix& v_in,
                                   const std::vector<bool>& key_mask, AttentionCache* cache) const {
  if (k_in.rows() != v_in.rows()) throw ShapeError("attention: key and value row counts differ");
  if (k_in.rows() == 0) throw ShapeError("attention: no keys");
  if (!key_mask.empty() && static_cast<Eigen::Index>(key_mask.size()) != k_in.rows()) {
    throw ShapeError("attention: key mask length differs from key count");
  }
  bool any_key = key_mask.empty();
  for (bool b : key_mask) any_key = any_key || b;
  if (!any_key) throw ShapeError("attention: every key is masked");

  AttentionCache local;
  AttentionCache& c = cache ? *cache : local;
  c.q = wq_.forward(q_in, &c.q_proj);
  c.k = wk_.forward(k_in, &c.k_proj);
  c.v = wv_.forward(v_in, &c.v_proj);
  c.key_mask = key_mask;
  c.weights.assign(heads_, {});

  const int dh = model_dim_ / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix concat(q_in.rows(), model_dim_);
  for (int h = 0; h < heads_; ++h) {
    const auto qh = c.q.middleCols(h * dh, dh);
    const auto kh = c.k.middleCols(h * dh, dh);
    const auto vh = c.v.middleCols(h * dh, dh);
    Matrix scores = (qh * kh.transpose()) * scale;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < scores.cols(); ++j) {
        if (key_mask.empty() || key_mask[j]) mx = std::max(mx, scores(r, j));
      }
      double sum = 0.0;
      for (Eigen::Index j = 0; j < scores.cols(); ++j) {
        const double e = (key_mask.empty() || key_mask[j]) ? std::exp(scores(r, j) - mx) : 0.0;
        scores(r, j) = e;
        sum += e;
      }
      scores.row(r) /= sum;
    }
    concat.middleCols(h * dh, dh) = scores * vh;
    c.weights[h] = std::move(scores);
  }
  c.filled = true;
  return wo_.forward(concat, &c.out_proj);
}

AttentionGrads MultiHeadAttention::backward(const AttentionCache& c, const Matrix& dy) const {
  if (!c.filled) throw MissingCacheError("attention: backward called without a forward cache");
  const Matrix dconcat = wo_.backward(c.out_proj, dy);
  const int dh = model_dim_ / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix dq(c.q.rows(), model_dim_);
  Matrix dk(c.k.rows(), model_dim_);
  Matrix dv(c.v.rows(), model_dim_);
  for (int h = 0; h < heads_; ++h) {
    const Matrix& a = c.weights[h];
    const auto qh = c.q.middleCols(h * dh, dh);
    const auto kh = c.k.middleCols(h * dh, dh);
    const auto vh = c.v.middleCols(h * dh, dh);
    const auto doh = dconcat.middleCols(h * dh, dh);
    const Matrix da = doh * vh.transpose();
    dv.middleCols(h * dh, dh) = a.transpose() * doh;
    // Softmax Jacobian per row: ds = a * (da - <da, a>).
    const Eigen::VectorXd inner = (da.array() * a.array()).rowwise().sum();
    Matrix ds = a.array() * (da.array().colwise() - inner.array());
    ds *= scale;
    dq.middleCols(h * dh, dh) = ds * kh;
    dk.middleCols(h * dh, dh) = ds.transpose() * qh;
  }
  AttentionGrads g;
  g.dq = wq_.backward(c.q_proj, dq);
  g.dk = wk_.backward(c.k_proj, dk);
  g.dv = wv_.backward(c.v_proj, dv);
  return g;
}

}  // namespace scenecode::nn
