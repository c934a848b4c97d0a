#pragma once

// Test-only oracles. Nothing here calls into the implementation path it is
// used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "salm/model.hpp"

namespace salm::testing {

/// Longest common subsequence by exhaustive enumeration of the subsets of
/// `a` (fine for |a| <= ~12).
inline std::size_t brute_force_lcs(const std::vector<std::string>& a,
                                   const std::vector<std::string>& b) {
  std::size_t best = 0;
  const std::size_t n = a.size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    std::vector<const std::string*> sub;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (std::size_t{1} << i)) sub.push_back(&a[i]);
    if (sub.size() <= best) continue;
    std::size_t k = 0;
    for (std::size_t j = 0; j < b.size() && k < sub.size(); ++j)
      if (b[j] == *sub[k]) ++k;
    if (k == sub.size()) best = sub.size();
  }
  return best;
}

struct GradientMismatch {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradientCheckResult {
  std::size_t checked = 0;
  std::vector<GradientMismatch> mismatches;
  double worst_relative = 0.0;
};

/// Central differences of `loss` at `step` for up to `per_tensor` random
/// coordinates of every tensor (all of them when the tensor is smaller).
/// A coordinate passes when |a - n| <= rel_tol * max(|a|, |n|) or
/// |a - n| <= abs_floor.
inline GradientCheckResult finite_difference_check(
    Parameters params, const Parameters& analytic,
    const std::function<double(const Parameters&)>& loss, std::size_t per_tensor, double step,
    double rel_tol, double abs_floor, std::uint64_t seed) {
  GradientCheckResult out;
  std::mt19937_64 rng(seed);
  auto tensors = params.tensors();
  const auto grads = analytic.tensors();
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    Matrix& t = *tensors[ti].second;
    const Matrix& g = *grads[ti].second;
    const auto size = static_cast<std::size_t>(t.size());
    std::vector<std::size_t> coords(size);
    for (std::size_t i = 0; i < size; ++i) coords[i] = i;
    if (size > per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(per_tensor);
    }
    for (std::size_t idx : coords) {
      const double saved = t.data()[idx];
      t.data()[idx] = saved + step;
      const double up = loss(params);
      t.data()[idx] = saved - step;
      const double down = loss(params);
      t.data()[idx] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = g.data()[idx];
      const double diff = std::abs(a - numeric);
      const double scale = std::max(std::abs(a), std::abs(numeric));
      ++out.checked;
      if (diff > abs_floor && scale > 0.0) out.worst_relative = std::max(out.worst_relative, diff / scale);
      if (!(diff <= rel_tol * scale || diff <= abs_floor))
        out.mismatches.push_back({tensors[ti].first, idx, a, numeric});
    }
  }
  return out;
}

}  // namespace salm::testing
