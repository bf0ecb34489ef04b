#ifndef DEPTHBAYES_POSTERIOR_HPP
#define DEPTHBAYES_POSTERIOR_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "depthbayes/rng.hpp"
#include "depthbayes/tensor.hpp"
#include "depthbayes/train.hpp"

namespace depthbayes {

inline constexpr double default_jitter = 1e-8;

struct DiagGaussian {
  Tensor mean;      // [d]
  Tensor variance;  // [d]
};

// Σ = ½(diag(σ²) + D·Dᵀ/(n−1)) + λI with D the n deviation columns.
struct LowRankPlusDiagGaussian {
  Tensor mean;        // [d]
  Tensor variance;    // [d]
  Tensor deviations;  // [d, n], column i is θ_i − μ
  double jitter = default_jitter;

  std::size_t members() const { return deviations.extent(1); }
};

enum class Provenance { checkpoint_ensemble, deep_ensemble, gaussian };

inline std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::checkpoint_ensemble: return "checkpoint-ensemble";
    case Provenance::deep_ensemble: return "deep-ensemble";
    case Provenance::gaussian: return "gaussian";
  }
  return "?";
}

struct SampleSet {
  std::vector<Tensor> members;
  Provenance provenance = Provenance::checkpoint_ensemble;

  std::size_t size() const { return members.size(); }
};

using Posterior = std::variant<DiagGaussian, LowRankPlusDiagGaussian, SampleSet>;

namespace detail {

inline std::size_t check_members(std::span<const Tensor> thetas, std::size_t min_count,
                                 const char* what) {
  if (thetas.size() < min_count) {
    throw DomainError(std::string(what) + ": need at least " + std::to_string(min_count) +
                      " members, got " + std::to_string(thetas.size()));
  }
  const std::size_t d = thetas.front().size();
  for (const auto& t : thetas) {
    if (t.rank() != 1 || t.size() != d) {
      throw ShapeError(std::string(what) + ": member shape " + to_string(t.shape()) +
                       " differs from length " + std::to_string(d));
    }
  }
  return d;
}

inline Tensor mean_of(std::span<const Tensor> thetas) {
  const std::size_t d = thetas.front().size();
  Tensor mu(Shape{d});
  for (const auto& t : thetas)
    for (std::size_t i = 0; i < d; ++i) mu[i] += t[i];
  for (auto& v : mu.values()) v /= static_cast<double>(thetas.size());
  return mu;
}

// (1/n)Σθ_i² − μ², accumulated as the mean squared deviation from μ.
inline Tensor variance_of(std::span<const Tensor> thetas, const Tensor& mu) {
  Tensor var(mu.shape());
  for (const auto& t : thetas)
    for (std::size_t i = 0; i < mu.size(); ++i) var[i] += (t[i] - mu[i]) * (t[i] - mu[i]);
  for (auto& v : var.values()) v = std::max(0.0, v / static_cast<double>(thetas.size()));
  return var;
}

}  // namespace detail

inline DiagGaussian fit_swag_diag(std::span<const Tensor> thetas) {
  detail::check_members(thetas, 2, "fit_swag_diag");
  Tensor mu = detail::mean_of(thetas);
  Tensor var = detail::variance_of(thetas, mu);
  return DiagGaussian{std::move(mu), std::move(var)};
}

inline LowRankPlusDiagGaussian fit_swag_lowrank(std::span<const Tensor> thetas,
                                                double jitter = default_jitter) {
  const std::size_t d = detail::check_members(thetas, 2, "fit_swag_lowrank");
  if (!(jitter >= 0.0)) throw DomainError("fit_swag_lowrank: jitter must be >= 0");
  const std::size_t n = thetas.size();
  Tensor mu = detail::mean_of(thetas);
  Tensor var = detail::variance_of(thetas, mu);
  Tensor dev(Shape{d, n});
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < d; ++i) dev[i * n + j] = thetas[j][i] - mu[i];
  return LowRankPlusDiagGaussian{std::move(mu), std::move(var), std::move(dev), jitter};
}

// Dense Σ; only sensible for small d.
inline Tensor materialize_covariance(const LowRankPlusDiagGaussian& q) {
  const std::size_t d = q.mean.size(), n = q.members();
  Tensor cov = matmul_nt(q.deviations, q.deviations);
  for (auto& v : cov.values()) v *= 0.5 / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < d; ++i) cov[i * d + i] += 0.5 * q.variance[i] + q.jitter;
  return cov;
}

// Draw i uses its own stream (seed, i), so draws are independent of order.
inline SampleSet sample(const DiagGaussian& q, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw DomainError("sample: count must be >= 1");
  SampleSet out{{}, Provenance::gaussian};
  const std::size_t d = q.mean.size();
  for (std::size_t s = 0; s < count; ++s) {
    Rng rng = make_rng(seed, s);
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor theta = q.mean;
    for (std::size_t i = 0; i < d; ++i) {
      const double z = normal(rng);
      if (q.variance[i] != 0.0) theta[i] += std::sqrt(q.variance[i]) * z;
    }
    out.members.push_back(std::move(theta));
  }
  return out;
}

// θ = μ + sqrt(½σ² + λ)⊙z₁ + D·z₂/sqrt(2(n−1)).
inline SampleSet sample(const LowRankPlusDiagGaussian& q, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw DomainError("sample: count must be >= 1");
  SampleSet out{{}, Provenance::gaussian};
  const std::size_t d = q.mean.size(), n = q.members();
  const double dev_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(n - 1));
  std::vector<double> z2(n);
  for (std::size_t s = 0; s < count; ++s) {
    Rng rng = make_rng(seed, s);
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor theta = q.mean;
    for (std::size_t i = 0; i < d; ++i) {
      const double z = normal(rng);
      const double sd = std::sqrt(0.5 * q.variance[i] + q.jitter);
      if (sd != 0.0) theta[i] += sd * z;
    }
    for (auto& z : z2) z = normal(rng);
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += q.deviations[i * n + j] * z2[j];
      if (acc != 0.0) theta[i] += dev_scale * acc;
    }
    out.members.push_back(std::move(theta));
  }
  return out;
}

// Returns the first min(count, size) members.
inline SampleSet sample(const SampleSet& q, std::size_t count, std::uint64_t /*seed*/) {
  if (count < 1) throw DomainError("sample: count must be >= 1");
  SampleSet out{{}, q.provenance};
  const std::size_t m = std::min(count, q.size());
  out.members.assign(q.members.begin(), q.members.begin() + static_cast<std::ptrdiff_t>(m));
  return out;
}

inline SampleSet sample(const Posterior& q, std::size_t count, std::uint64_t seed) {
  return std::visit([&](const auto& p) { return sample(p, count, seed); }, q);
}

inline SampleSet checkpoint_ensemble(std::span<const Tensor> thetas, std::size_t m) {
  detail::check_members(thetas, 1, "checkpoint_ensemble");
  SampleSet out{{}, Provenance::checkpoint_ensemble};
  for (auto i : equidistant_indices(thetas.size(), m)) out.members.push_back(thetas[i]);
  return out;
}

inline SampleSet deep_ensemble(std::span<const Tensor> finals) {
  detail::check_members(finals, 2, "deep_ensemble");
  return SampleSet{std::vector<Tensor>(finals.begin(), finals.end()), Provenance::deep_ensemble};
}

inline bool all_finite(const SampleSet& s) {
  for (const auto& m : s.members)
    if (!all_finite(m)) return false;
  return true;
}

}  // namespace depthbayes

#endif  // DEPTHBAYES_POSTERIOR_HPP
