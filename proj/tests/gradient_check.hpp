#ifndef DEPTHBAYES_GRADIENT_CHECK_HPP
#define DEPTHBAYES_GRADIENT_CHECK_HPP

#include <cmath>
#include <random>
#include <span>

#include "depthbayes/train.hpp"

namespace depthbayes::testing {

// True when some pixel sits within `margin` of a kink of |n(pred) − n(target)|.
inline bool near_kink(const ToyDepthNet& model, std::span<const Scene> batch, double margin = 1e-4) {
  for (const auto& s : batch) {
    const NormalizedMap p = normalize_map(forward(model, s.image));
    const NormalizedMap t = normalize_map(s.disparity);
    for (std::size_t j = 0; j < p.values.size(); ++j)
      if (std::abs(p.values[j] - t.values[j]) < margin) return true;
  }
  return false;
}

struct DirectionalCheck {
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error() const {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  }
};

// Compares g·v against the central difference of the batch loss along a
// random unit direction v, with θ moved to `theta` first.
inline DirectionalCheck directional_check(ToyDepthNet& model, const SubspaceDescriptor& desc,
                                          std::span<const Scene> batch, const Tensor& theta,
                                          std::mt19937_64& rng, double step = 1e-5) {
  std::normal_distribution<double> n01;
  Tensor v(Shape{desc.dim});
  for (auto& x : v.values()) x = n01(rng);
  v = (1.0 / frobenius_norm(v)) * v;

  unflatten(model, desc, theta);
  const Tensor g = gradient(model, desc, batch);
  double analytic = 0.0;
  for (std::size_t i = 0; i < desc.dim; ++i) analytic += g[i] * v[i];

  unflatten(model, desc, theta + step * v);
  const double up = batch_loss(model, batch);
  unflatten(model, desc, theta - step * v);
  const double down = batch_loss(model, batch);
  unflatten(model, desc, theta);
  return DirectionalCheck{analytic, (up - down) / (2.0 * step)};
}

}  // namespace depthbayes::testing

#endif  // DEPTHBAYES_GRADIENT_CHECK_HPP
