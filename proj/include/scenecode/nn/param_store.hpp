// Named parameters with gradient buffers.
#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace scenecode::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Rng = std::mt19937_64;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown by a backward pass that is called without its forward cache.
class MissingCacheError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
};

enum class Init { glorot_uniform, zeros, ones };

/// Owns parameters at stable addresses; layers keep raw pointers into it, so
/// a store is move-only.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  Param& add(std::string name, Eigen::Index rows, Eigen::Index cols, Init init, Rng& rng);

  [[nodiscard]] Param* find(std::string_view name);
  [[nodiscard]] const Param* find(std::string_view name) const;
  [[nodiscard]] std::vector<Param*> params();
  [[nodiscard]] std::vector<const Param*> params() const;
  [[nodiscard]] std::size_t tensor_count() const { return params_.size(); }
  [[nodiscard]] std::size_t scalar_count() const;

  void zero_grad();
  [[nodiscard]] bool all_finite() const;

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

}  // namespace scenecode::nn
