#ifndef DEPTHBAYES_TEST_SUPPORT_HPP
#define DEPTHBAYES_TEST_SUPPORT_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "depthbayes/tensor.hpp"

namespace depthbayes::testing {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

inline double relative_error(const Tensor& got, const Tensor& want) {
  return frobenius_norm(got - want) / std::max(1.0, frobenius_norm(want));
}

// Cross-correlation by the defining sum, reading zero outside the input.
inline Tensor naive_conv(const Tensor& x, const Tensor& k, std::size_t stride, std::size_t pad,
                         const Tensor* bias = nullptr) {
  const std::size_t cin = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t cout = k.extent(0), k1 = k.extent(2), k2 = k.extent(3);
  const std::size_t oh = (h + 2 * pad - k1) / stride + 1, ow = (w + 2 * pad - k2) / stride + 1;
  Tensor y(Shape{cout, oh, ow});
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = bias ? (*bias)[o] : 0.0;
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t a = 0; a < k1; ++a)
            for (std::size_t b = 0; b < k2; ++b) {
              const long r = static_cast<long>(i * stride + a) - static_cast<long>(pad);
              const long q = static_cast<long>(j * stride + b) - static_cast<long>(pad);
              if (r < 0 || q < 0 || r >= static_cast<long>(h) || q >= static_cast<long>(w)) continue;
              acc += x.at(c, static_cast<std::size_t>(r), static_cast<std::size_t>(q)) * k.at(o, c, a, b);
            }
        y.at(o, i, j) = acc;
      }
  return y;
}

// ΔW[o,i,a,b] = Σ_{p,q} U1[o,p] C[p,q,a,b] U2[i,q], written out term by term.
inline Tensor naive_tucker2(const Tensor& core, const Tensor& u1, const Tensor& u2) {
  const std::size_t r1 = core.extent(0), r2 = core.extent(1), k1 = core.extent(2), k2 = core.extent(3);
  const std::size_t cout = u1.extent(0), cin = u2.extent(0);
  Tensor w(Shape{cout, cin, k1, k2});
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < cin; ++i)
      for (std::size_t a = 0; a < k1; ++a)
        for (std::size_t b = 0; b < k2; ++b) {
          double acc = 0.0;
          for (std::size_t p = 0; p < r1; ++p)
            for (std::size_t q = 0; q < r2; ++q) acc += u1.at(o, p) * core.at(p, q, a, b) * u2.at(i, q);
          w.at(o, i, a, b) = acc;
        }
  return w;
}

// Per-coordinate μ and (1/n)Σθ² − μ², accumulated in long double.
inline std::pair<Tensor, Tensor> moment_oracle(const std::vector<Tensor>& thetas) {
  const std::size_t d = thetas.front().size();
  const auto n = static_cast<long double>(thetas.size());
  Tensor mu(Shape{d}), var(Shape{d});
  for (std::size_t i = 0; i < d; ++i) {
    long double s = 0, s2 = 0;
    for (const auto& t : thetas) {
      s += t[i];
      s2 += static_cast<long double>(t[i]) * t[i];
    }
    const long double m = s / n;
    mu[i] = static_cast<double>(m);
    var[i] = static_cast<double>(std::max<long double>(0, s2 / n - m * m));
  }
  return {mu, var};
}

// ½(diag(σ²) + (1/(n−1)) Σ_k (θ_k − μ)(θ_k − μ)ᵀ) + λI by explicit outer products.
inline Tensor covariance_oracle(const std::vector<Tensor>& thetas, double jitter) {
  const auto [mu, var] = moment_oracle(thetas);
  const std::size_t d = mu.size(), n = thetas.size();
  Tensor cov(Shape{d, d});
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      long double acc = 0;
      for (const auto& t : thetas) acc += static_cast<long double>(t[a] - mu[a]) * (t[b] - mu[b]);
      cov.at(a, b) = static_cast<double>(0.5L * acc / static_cast<long double>(n - 1));
    }
  for (std::size_t a = 0; a < d; ++a) cov.at(a, a) += 0.5 * var[a] + jitter;
  return cov;
}

// Entrywise sample covariance of the members, divisor count − 1.
inline Tensor sample_covariance(const std::vector<Tensor>& xs) {
  const std::size_t d = xs.front().size();
  const auto n = static_cast<double>(xs.size());
  Tensor mean(Shape{d}), cov(Shape{d, d});
  for (const auto& x : xs)
    for (std::size_t i = 0; i < d; ++i) mean[i] += x[i] / n;
  for (const auto& x : xs)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) cov.at(a, b) += (x[a] - mean[a]) * (x[b] - mean[b]) / (n - 1.0);
  return cov;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("depthbayes_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace depthbayes::testing

#endif  // DEPTHBAYES_TEST_SUPPORT_HPP
