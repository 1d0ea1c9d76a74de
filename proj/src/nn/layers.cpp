#include "scenecode/nn/layers.hpp"

#include <cmath>

namespace scenecode::nn {

namespace {

void require(bool filled, const char* what) {
  if (!filled) throw MissingCacheError(std::string(what) + ": backward called without a forward cache");
}

}  // namespace

Matrix positional_encode(const Eigen::MatrixXi& codes, int frequency_pairs) {
  if (frequency_pairs < 1) throw ShapeError("positional_encode needs at least one frequency pair");
  const Eigen::Index pairs = frequency_pairs;
  Matrix out(codes.rows(), codes.cols() * 2 * pairs);
  for (Eigen::Index r = 0; r < codes.rows(); ++r) {
    for (Eigen::Index c = 0; c < codes.cols(); ++c) {
      const double v = codes(r, c);
      for (Eigen::Index k = 0; k < pairs; ++k) {
        const double divisor = std::pow(10000.0, static_cast<double>(2 * k) / static_cast<double>(2 * pairs));
        out(r, (c * pairs + k) * 2) = std::sin(v / divisor);
        out(r, (c * pairs + k) * 2 + 1) = std::cos(v / divisor);
      }
    }
  }
  return out;
}

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng)
    : weight_(&store.add(name + ".weight", in, out, Init::glorot_uniform, rng)),
      bias_(&store.add(name + ".bias", 1, out, Init::zeros, rng)),
      in_(in),
      out_(out) {}

Matrix Linear::forward(const Matrix& x, LinearCache* cache) const {
  if (x.cols() != in_) {
    throw ShapeError("linear '" + weight_->name + "': expected " + std::to_string(in_) + " input columns, got " +
                     std::to_string(x.cols()));
  }
  if (cache) {
    cache->input = x;
    cache->filled = true;
  }
  Matrix y = x * weight_->value;
  y.rowwise() += bias_->value.row(0);
  return y;
}

Matrix Linear::backward(const LinearCache& cache, const Matrix& dy) const {
  require(cache.filled, "linear");
  weight_->grad.noalias() += cache.input.transpose() * dy;
  bias_->grad.row(0) += dy.colwise().sum();
  return dy * weight_->value.transpose();
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix silu(const Matrix& x) {
  return x.unaryExpr([](double v) { return v * sigmoid(v); });
}

Matrix silu_backward(const Matrix& x, const Matrix& dy) {
  Matrix d = x.unaryExpr([](double v) {
    const double s = sigmoid(v);
    return s * (1.0 + v * (1.0 - s));
  });
  return d.cwiseProduct(dy);
}

Mlp::Mlp(ParamStore& store, const std::string& name, const std::vector<int>& dims, Rng& rng) {
  if (dims.size() < 2) throw ShapeError("mlp '" + name + "' needs at least input and output dims");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    layers_.emplace_back(store, name + ".l" + std::to_string(i), dims[i], dims[i + 1], rng);
  }
}

Matrix Mlp::forward(const Matrix& x, MlpCache* cache) const {
  if (cache) {
    cache->linear.assign(layers_.size(), {});
    cache->pre_activation.assign(layers_.size(), {});
    cache->filled = true;
  }
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix z = layers_[i].forward(h, cache ? &cache->linear[i] : nullptr);
    if (i + 1 < layers_.size()) {
      h = silu(z);
      if (cache) cache->pre_activation[i] = std::move(z);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

Matrix Mlp::backward(const MlpCache& cache, const Matrix& dy) const {
  require(cache.filled, "mlp");
  Matrix g = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (i + 1 < layers_.size()) g = silu_backward(cache.pre_activation[i], g);
    g = layers_[i].backward(cache.linear[i], g);
  }
  return g;
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& name, int dim, Rng& rng)
    : gamma_(&store.add(name + ".gamma", 1, dim, Init::ones, rng)),
      beta_(&store.add(name + ".beta", 1, dim, Init::zeros, rng)) {}

Matrix LayerNorm::forward(const Matrix& x, LayerNormCache* cache) const {
  if (x.cols() != gamma_->value.cols()) throw ShapeError("layer norm '" + gamma_->name + "': width mismatch");
  const Eigen::Index n = x.cols();
  Matrix xhat(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps_);
    xhat.row(r) = (x.row(r).array() - mean) * inv_std(r);
  }
  Matrix y = xhat.array().rowwise() * gamma_->value.row(0).array();
  y.rowwise() += beta_->value.row(0);
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->filled = true;
  }
  return y;
}

Matrix LayerNorm::backward(const LayerNormCache& cache, const Matrix& dy) const {
  require(cache.filled, "layer norm");
  const Matrix& xhat = cache.normalized;
  gamma_->grad.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  beta_->grad.row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gamma_->value.row(0).array();
  const double n = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double mean_d = dxhat.row(r).mean();
    const double mean_dx = (dxhat.row(r).array() * xhat.row(r).array()).sum() / n;
    dx.row(r) = cache.inv_std(r) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx);
  }
  return dx;
}

}  // namespace scenecode::nn
