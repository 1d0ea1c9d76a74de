#include "scenecode/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace scenecode::nn {

GradcheckReport gradcheck(const std::vector<Param*>& params, const std::function<double(bool)>& loss,
                          const GradcheckOptions& options) {
  loss(true);
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (const Param* p : params) analytic.push_back(p->grad);

  std::vector<std::pair<std::size_t, Eigen::Index>> entries;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (Eigen::Index k = 0; k < params[i]->value.size(); ++k) entries.emplace_back(i, k);
  }
  if (entries.size() > options.max_entries) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(options.max_entries);
  }

  GradcheckReport report;
  for (const auto& [i, k] : entries) {
    double& value = params[i]->value.data()[k];
    const double saved = value;
    const double h = options.step;
    auto at = [&](double offset) {
      value = saved + offset;
      return loss(false);
    };
    const double numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
    value = saved;
    const double exact = analytic[i].data()[k];
    const double scale = std::max(std::abs(numeric), std::abs(exact));
    const double err = scale < options.absolute_floor ? 0.0 : std::abs(numeric - exact) / scale;
    if (err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_entry = params[i]->name + "[" + std::to_string(k) + "]";
      report.worst_numeric = numeric;
      report.worst_analytic = exact;
    }
    ++report.checked;
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace scenecode::nn
