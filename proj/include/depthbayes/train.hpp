#ifndef DEPTHBAYES_TRAIN_HPP
#define DEPTHBAYES_TRAIN_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "depthbayes/data.hpp"
#include "depthbayes/loss.hpp"
#include "depthbayes/model.hpp"
#include "depthbayes/parallel.hpp"
#include "depthbayes/peft.hpp"
#include "depthbayes/rng.hpp"

namespace depthbayes {

struct LossAndGradient {
  double loss = 0.0;
  Tensor gradient;  // [d]
};

// Batch affine-invariant MAE and its derivative with respect to the subspace
// vector θ only.
inline LossAndGradient loss_and_gradient(const ToyDepthNet& model, const SubspaceDescriptor& desc,
                                         std::span<const Scene> batch) {
  if (batch.empty()) throw DomainError("gradient: empty batch");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> losses(batch.size());
  std::vector<Tensor> grads(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    ForwardCache cache;
    const Tensor pred = forward(model, batch[i].image, &cache);
    try {
      losses[i] = image_loss(pred, batch[i].disparity);
    } catch (const DomainError& e) {
      throw DomainError("batch item " + std::to_string(i) + ": " + e.what());
    }
    Tensor upstream = image_loss_gradient(pred, batch[i].disparity);
    for (auto& v : upstream.values()) v *= inv_n;
    ToyDepthNet g = zeros_like(model);
    backward(model, cache, upstream, g);
    grads[i] = flatten(g, desc);
  });
  LossAndGradient out{0.0, Tensor(Shape{desc.dim})};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.loss += losses[i] * inv_n;
    out.gradient = out.gradient + grads[i];
  }
  return out;
}

inline Tensor gradient(const ToyDepthNet& model, const SubspaceDescriptor& desc,
                       std::span<const Scene> batch) {
  return loss_and_gradient(model, desc, batch).gradient;
}

inline double batch_loss(const ToyDepthNet& model, std::span<const Scene> batch) {
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    losses[i] = image_loss(forward(model, batch[i].image), batch[i].disparity);
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(batch.size());
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::size_t step = 0;
  Tensor m;
  Tensor v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(std::size_t dim, double lr) {
    AdamState s;
    s.m = Tensor(Shape{dim});
    s.v = Tensor(Shape{dim});
    s.lr = lr;
    return s;
  }
};

inline std::pair<AdamState, Tensor> adam_step(AdamState state, Tensor theta, const Tensor& g) {
  if (theta.size() != g.size() || state.m.size() != g.size() || state.v.size() != g.size()) {
    throw ShapeError("adam_step: lengths differ (theta " + std::to_string(theta.size()) +
                     ", gradient " + std::to_string(g.size()) + ", state " +
                     std::to_string(state.m.size()) + ")");
  }
  state.step += 1;
  const auto t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < g.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g[i] * g[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    theta[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
  return {std::move(state), std::move(theta)};
}

// ---------------------------------------------------------------------------
// Continued fine-tuning

struct TrainSchedule {
  std::size_t epochs = 20;
  std::size_t batch_size = 4;
  std::size_t checkpoints = 100;
  double lr = 1e-3;
  std::uint64_t seed = 0;

  bool operator==(const TrainSchedule&) const = default;
};

struct Checkpoint {
  Tensor theta;
  std::size_t step = 0;  // 1-based optimizer step after which θ was captured
  double loss = 0.0;     // batch loss at that step
};

// 0-based indices ceil((j+1)·n/m) − 1 for j < m; the last is always n − 1.
inline std::vector<std::size_t> equidistant_indices(std::size_t n, std::size_t m) {
  if (m < 1 || m > n) {
    throw DomainError("equidistant selection of " + std::to_string(m) + " from " +
                      std::to_string(n) + " items");
  }
  std::vector<std::size_t> idx(m);
  for (std::size_t j = 0; j < m; ++j) idx[j] = ((j + 1) * n + m - 1) / m - 1;
  return idx;
}

inline std::size_t total_steps(std::size_t samples, const TrainSchedule& s) {
  return s.epochs * ((samples + s.batch_size - 1) / s.batch_size);
}

// Adam on θ over shuffled mini-batches; captures θ after each of
// `checkpoints` equidistant steps, the last step included. The model is left
// at the final θ. Per-step batch losses go to `step_losses` when given.
inline std::vector<Checkpoint> finetune(ToyDepthNet& model, const SubspaceDescriptor& desc,
                                        std::span<const Scene> dataset, const TrainSchedule& sched,
                                        std::vector<double>* step_losses = nullptr) {
  if (dataset.empty()) throw DomainError("finetune: empty dataset");
  if (sched.epochs < 1 || sched.batch_size < 1 || sched.checkpoints < 1) {
    throw DomainError("finetune: epochs, batch size and checkpoint count must be >= 1");
  }
  const std::size_t steps = total_steps(dataset.size(), sched);
  if (sched.checkpoints > steps) {
    throw DomainError("finetune: " + std::to_string(sched.checkpoints) +
                      " checkpoints requested but only " + std::to_string(steps) + " steps");
  }
  std::vector<std::size_t> capture = equidistant_indices(steps, sched.checkpoints);

  Tensor theta = flatten(model, desc);
  AdamState adam = AdamState::init(desc.dim, sched.lr);
  std::vector<Checkpoint> out;
  out.reserve(sched.checkpoints);
  if (step_losses) step_losses->clear();

  std::vector<std::size_t> order(dataset.size());
  std::size_t step = 0, next_capture = 0;
  for (std::size_t epoch = 0; epoch < sched.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(sched.seed, 0x65706f6368000000ull + epoch);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += sched.batch_size) {
      const std::size_t end = std::min(order.size(), start + sched.batch_size);
      std::vector<Scene> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
      LossAndGradient lg = loss_and_gradient(model, desc, batch);
      std::tie(adam, theta) = adam_step(std::move(adam), std::move(theta), lg.gradient);
      unflatten(model, desc, theta);
      if (step_losses) step_losses->push_back(lg.loss);
      if (next_capture < capture.size() && capture[next_capture] == step) {
        out.push_back(Checkpoint{theta, step + 1, lg.loss});
        ++next_capture;
      }
      ++step;
    }
  }
  return out;
}

inline std::vector<Tensor> thetas(const std::vector<Checkpoint>& checkpoints) {
  std::vector<Tensor> out;
  out.reserve(checkpoints.size());
  for (const auto& c : checkpoints) out.push_back(c.theta);
  return out;
}

}  // namespace depthbayes

#endif  // DEPTHBAYES_TRAIN_HPP
