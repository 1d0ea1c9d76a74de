// Finite-difference check of analytic gradients with the five-point central
// stencil, whose O(h^4) truncation error allows a step large enough to keep
// cancellation noise small.
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "scenecode/nn/param_store.hpp"

namespace scenecode::nn {

struct GradcheckOptions {
  double tolerance{1e-4};
  double step{1e-3};
  /// Pairs where both gradients fall below this are treated as equal.
  double absolute_floor{1e-8};
  /// Upper bound on checked entries; larger parameter sets are subsampled
  /// deterministically.
  std::size_t max_entries{20000};
  std::uint64_t seed{0};
};

struct GradcheckReport {
  double max_relative_error{0.0};
  std::string worst_entry;
  double worst_numeric{0.0};
  double worst_analytic{0.0};
  std::size_t checked{0};
  bool passed{false};
};

/// `loss(compute_grads)` must evaluate a scalar loss from the current
/// parameter values; when `compute_grads` is true it must also leave the
/// analytic gradients in the parameter buffers (zeroing them first).
/// Inputs can be checked by registering them as parameters.
GradcheckReport gradcheck(const std::vector<Param*>& params, const std::function<double(bool)>& loss,
                          const GradcheckOptions& options = {});

}  // namespace scenecode::nn
