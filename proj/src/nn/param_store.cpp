#include "scenecode/nn/param_store.hpp"

#include <cmath>

namespace scenecode::nn {

Param& ParamStore::add(std::string name, Eigen::Index rows, Eigen::Index cols, Init init, Rng& rng) {
  if (rows <= 0 || cols <= 0) throw ShapeError("parameter '" + name + "' needs positive dims");
  if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter '" + name + "'");
  auto p = std::make_unique<Param>();
  p->name = std::move(name);
  p->value.resize(rows, cols);
  p->grad = Matrix::Zero(rows, cols);
  switch (init) {
    case Init::zeros: p->value.setZero(); break;
    case Init::ones: p->value.setOnes(); break;
    case Init::glorot_uniform: {
      const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = dist(rng);
      break;
    }
  }
  params_.push_back(std::move(p));
  return *params_.back();
}

Param* ParamStore::find(std::string_view name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Param* ParamStore::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

std::vector<Param*> ParamStore::params() {
  std::vector<Param*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Param*> ParamStore::params() const {
  std::vector<const Param*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

bool ParamStore::all_finite() const {
  for (const auto& p : params_) {
    if (!p->value.allFinite()) return false;
  }
  return true;
}

}  // namespace scenecode::nn
