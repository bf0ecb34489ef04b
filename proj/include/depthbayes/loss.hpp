#ifndef DEPTHBAYES_LOSS_HPP
#define DEPTHBAYES_LOSS_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "depthbayes/tensor.hpp"

namespace depthbayes {

// Maps whose mean absolute deviation is at or below this are degenerate.
inline constexpr double normalization_eps = 1e-8;

// Middle order statistic; mean of the two middle ones for an even count.
inline double spatial_median(const Tensor& m) {
  std::vector<double> v(m.data().begin(), m.data().end());
  if (v.empty()) throw DomainError("spatial_median: empty map");
  const std::size_t n = v.size(), mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

inline double mae_dev(const Tensor& m, double median) {
  double sum = 0.0;
  for (double v : m.data()) sum += std::abs(v - median);
  return sum / static_cast<double>(m.size());
}

inline double mae_dev(const Tensor& m) { return mae_dev(m, spatial_median(m)); }

struct NormalizedMap {
  Tensor values;
  double median = 0.0;
  double mae = 0.0;
};

inline NormalizedMap normalize_map(const Tensor& m) {
  const double med = spatial_median(m);
  const double mae = mae_dev(m, med);
  if (!(mae > normalization_eps)) {
    throw DomainError("degenerate map: mean absolute deviation " + std::to_string(mae) +
                      " <= " + std::to_string(normalization_eps));
  }
  Tensor values = m;
  for (auto& v : values.values()) v = (v - med) / mae;
  return NormalizedMap{std::move(values), med, mae};
}

inline double mean_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw ShapeError("map sizes differ: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return sum / static_cast<double>(a.size());
}

// Affine-invariant MAE of one prediction/target pair.
inline double image_loss(const Tensor& pred, const Tensor& target) {
  if (pred.size() != target.size()) {
    throw ShapeError("image_loss: " + to_string(pred.shape()) + " vs " + to_string(target.shape()));
  }
  return mean_abs_diff(normalize_map(pred).values, normalize_map(target).values);
}

inline double affine_invariant_mae(std::span<const Tensor> pred, std::span<const Tensor> target) {
  if (pred.empty()) throw DomainError("affine_invariant_mae: empty batch");
  if (pred.size() != target.size()) {
    throw ShapeError("affine_invariant_mae: " + std::to_string(pred.size()) + " predictions vs " +
                     std::to_string(target.size()) + " targets");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    try {
      sum += image_loss(pred[i], target[i]);
    } catch (const DomainError& e) {
      throw DomainError("image " + std::to_string(i) + ": " + e.what());
    }
  }
  return sum / static_cast<double>(pred.size());
}

inline double affine_invariant_mae(const Tensor& pred, const Tensor& target) {
  return affine_invariant_mae(std::span<const Tensor>(&pred, 1), std::span<const Tensor>(&target, 1));
}

// log L(D|θ) up to an additive constant.
inline double log_likelihood(std::span<const Tensor> pred, std::span<const Tensor> target) {
  return -affine_invariant_mae(pred, target);
}

inline double log_likelihood(const Tensor& pred, const Tensor& target) {
  return -affine_invariant_mae(pred, target);
}

// d image_loss / d pred. Subgradient conventions: d|u|/du = 0 at u = 0; the
// median derivative routes to the middle order statistic, split 1/2-1/2
// between the two middle elements for an even count (ties broken by index).
inline Tensor image_loss_gradient(const Tensor& pred, const Tensor& target) {
  const std::size_t n = pred.size();
  if (target.size() != n) {
    throw ShapeError("image_loss_gradient: " + to_string(pred.shape()) + " vs " +
                     to_string(target.shape()));
  }
  const NormalizedMap np = normalize_map(pred);
  const NormalizedMap nt = normalize_map(target);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pred[a] < pred[b]; });
  std::vector<double> median_weight(n, 0.0);
  if (n % 2 == 1) {
    median_weight[order[n / 2]] = 1.0;
  } else {
    median_weight[order[n / 2 - 1]] = 0.5;
    median_weight[order[n / 2]] += 0.5;
  }

  auto sign = [](double u) { return u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0); };
  const double inv_n = 1.0 / static_cast<double>(n);
  const double a = np.mae;

  // g_j = dℓ/dn_j, t_j = sign(ŷ_j − m).
  double sum_g = 0.0, sum_gn = 0.0, sum_t = 0.0;
  std::vector<double> g(n), t(n);
  for (std::size_t j = 0; j < n; ++j) {
    g[j] = sign(np.values[j] - nt.values[j]) * inv_n;
    t[j] = sign(pred[j] - np.median);
    sum_g += g[j];
    sum_gn += g[j] * np.values[j];
    sum_t += t[j];
  }
  Tensor grad(pred.shape());
  for (std::size_t k = 0; k < n; ++k) {
    const double dmae = inv_n * (t[k] - sum_t * median_weight[k]);
    grad[k] = g[k] / a - sum_g / a * median_weight[k] - sum_gn / a * dmae;
  }
  return grad;
}

}  // namespace depthbayes

#endif  // DEPTHBAYES_LOSS_HPP
