#ifndef DEPTHBAYES_EVAL_HPP
#define DEPTHBAYES_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "depthbayes/loss.hpp"
#include "depthbayes/model.hpp"
#include "depthbayes/peft.hpp"
#include "depthbayes/posterior.hpp"

namespace depthbayes {

// Monte-Carlo summary of the posterior predictive for one input. Every sample
// map is normalized by its own median and mean absolute deviation.
struct PredictiveSummary {
  std::vector<Tensor> normalized;
  Tensor mean;
  Tensor stddev;  // population convention
};

inline PredictiveSummary summarize(std::vector<Tensor> normalized) {
  if (normalized.empty()) throw DomainError("predictive summary needs at least one sample");
  const Shape& shape = normalized.front().shape();
  const std::size_t p = normalized.front().size();
  const auto s = static_cast<double>(normalized.size());
  Tensor mean(shape), var(shape);
  for (const auto& m : normalized) {
    require_shape(m, shape, "predictive sample");
    for (std::size_t i = 0; i < p; ++i) mean[i] += m[i];
  }
  for (auto& v : mean.values()) v /= s;
  for (const auto& m : normalized)
    for (std::size_t i = 0; i < p; ++i) var[i] += (m[i] - mean[i]) * (m[i] - mean[i]);
  for (auto& v : var.values()) v = std::sqrt(v / s);
  return PredictiveSummary{std::move(normalized), std::move(mean), std::move(var)};
}

// Forward pass per sample θ_s. The model's subspace values are restored
// before returning, also when a forward pass throws.
inline PredictiveSummary posterior_predict(ToyDepthNet& model, const SubspaceDescriptor& desc,
                                           const SampleSet& samples, const Tensor& x) {
  if (samples.members.empty()) throw DomainError("posterior_predict: empty sample set");
  for (const auto& s : samples.members) {
    if (s.size() != desc.dim) {
      throw ShapeError("posterior_predict: sample length " + std::to_string(s.size()) +
                       " does not match subspace dim " + std::to_string(desc.dim));
    }
  }
  const Tensor original = flatten(model, desc);
  std::vector<Tensor> maps;
  maps.reserve(samples.size());
  try {
    for (const auto& theta : samples.members) {
      unflatten(model, desc, theta);
      maps.push_back(normalize_map(forward(model, x)).values);
    }
  } catch (...) {
    unflatten(model, desc, original);
    throw;
  }
  unflatten(model, desc, original);
  return summarize(std::move(maps));
}

// −log((1/S)Σ exp(−ℓ_s)) via log-sum-exp.
inline double log_mean_exp_nll(std::span<const double> losses) {
  if (losses.empty()) throw DomainError("predictive_nll: no samples");
  const double lmin = *std::min_element(losses.begin(), losses.end());
  double sum = 0.0;
  for (double l : losses) sum += std::exp(-(l - lmin));
  return lmin - std::log(sum / static_cast<double>(losses.size()));
}

inline std::vector<double> sample_losses(const PredictiveSummary& summary, const Tensor& target) {
  const Tensor nt = normalize_map(target).values;
  std::vector<double> losses;
  losses.reserve(summary.normalized.size());
  for (const auto& m : summary.normalized) losses.push_back(mean_abs_diff(m, nt));
  return losses;
}

inline double predictive_nll(const PredictiveSummary& summary, const Tensor& target) {
  return log_mean_exp_nll(sample_losses(summary, target));
}

// |normalized mean prediction − normalized target| per pixel.
inline Tensor pixel_losses(const PredictiveSummary& summary, const Tensor& target) {
  const Tensor nt = normalize_map(target).values;
  Tensor out(summary.mean.shape());
  if (nt.size() != out.size()) throw ShapeError("pixel_losses: target size mismatch");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(summary.mean[i] - nt[i]);
  return out;
}

struct RetentionCurve {
  std::vector<double> quantiles;
  std::vector<double> values;
};

inline std::vector<double> default_retention_grid() {
  std::vector<double> q;
  for (int k = 1; k <= 20; ++k) q.push_back(k / 20.0);
  return q;
}

// Pixels pooled across maps and sorted by ascending std (ties by pooled
// index); the value at q is the mean loss of the first ceil(q·P) pixels.
inline RetentionCurve retention_curve(std::span<const Tensor> stddev, std::span<const Tensor> losses,
                                      std::span<const double> grid) {
  if (grid.empty()) throw DomainError("retention_curve: empty quantile grid");
  if (stddev.size() != losses.size() || stddev.empty()) {
    throw ShapeError("retention_curve: " + std::to_string(stddev.size()) + " std maps vs " +
                     std::to_string(losses.size()) + " loss maps");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] <= 1.0)) throw DomainError("retention_curve: quantile outside (0, 1]");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw DomainError("retention_curve: grid not increasing");
  }
  std::vector<double> sd, loss;
  for (std::size_t m = 0; m < stddev.size(); ++m) {
    if (stddev[m].size() != losses[m].size()) throw ShapeError("retention_curve: map extents differ");
    sd.insert(sd.end(), stddev[m].data().begin(), stddev[m].data().end());
    loss.insert(loss.end(), losses[m].data().begin(), losses[m].data().end());
  }
  const std::size_t p = sd.size();
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sd[a] < sd[b]; });
  std::vector<double> prefix(p + 1, 0.0);
  for (std::size_t i = 0; i < p; ++i) prefix[i + 1] = prefix[i] + loss[order[i]];

  RetentionCurve curve;
  for (double q : grid) {
    auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(p)));
    k = std::clamp<std::size_t>(k, 1, p);
    curve.quantiles.push_back(q);
    curve.values.push_back(prefix[k] / static_cast<double>(k));
  }
  return curve;
}

inline RetentionCurve retention_curve(const Tensor& stddev, const Tensor& losses,
                                      std::span<const double> grid) {
  return retention_curve(std::span<const Tensor>(&stddev, 1), std::span<const Tensor>(&losses, 1), grid);
}

// ---------------------------------------------------------------------------
// Rank sweep

inline constexpr double sweep_quantiles[] = {0.25, 0.5, 0.75};

struct SweepRow {
  std::string method;
  std::string inference;
  long rank = 0;
  double quantile = 0.0;
  double loss_mean = 0.0;
  double loss_ci95 = 0.0;

  bool operator==(const SweepRow&) const = default;
};

// Rows at the sweep quantiles, ordered by (method, inference, rank, quantile).
inline std::vector<SweepRow> rank_sweep(std::vector<SweepRow> rows) {
  std::erase_if(rows, [](const SweepRow& r) {
    return std::none_of(std::begin(sweep_quantiles), std::end(sweep_quantiles),
                        [&](double q) { return std::abs(q - r.quantile) < 1e-12; });
  });
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.method, a.inference, a.rank, a.quantile) <
           std::tie(b.method, b.inference, b.rank, b.quantile);
  });
  return rows;
}

}  // namespace depthbayes

#endif  // DEPTHBAYES_EVAL_HPP
