#ifndef DEPTHBAYES_PEFT_HPP
#define DEPTHBAYES_PEFT_HPP

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "depthbayes/adapters.hpp"
#include "depthbayes/model.hpp"
#include "depthbayes/rng.hpp"

namespace depthbayes {

enum class Method { bitfit, difffit, lora, colora, full };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::bitfit: return "bitfit";
    case Method::difffit: return "difffit";
    case Method::lora: return "lora";
    case Method::colora: return "colora";
    case Method::full: return "full";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
  for (Method m : {Method::bitfit, Method::difffit, Method::lora, Method::colora, Method::full})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

inline bool takes_rank(Method m) { return m == Method::lora || m == Method::colora; }

// How a requested rank relates to layers too narrow to hold it.
//   cap:    each layer uses min(r, din, dout)
//   strict: a rank above any adapted layer's min(din, dout) is an error
enum class RankPolicy { cap, strict };

struct Slot {
  std::string name;
  Shape shape;
  std::size_t offset = 0;
  std::size_t size = 0;

  bool operator==(const Slot&) const = default;
};

struct SubspaceDescriptor {
  Method method = Method::full;
  std::vector<Slot> slots;
  std::size_t dim = 0;

  bool contains(std::string_view name) const {
    return std::any_of(slots.begin(), slots.end(), [&](const Slot& s) { return s.name == name; });
  }
  const Slot& slot(std::string_view name) const {
    for (const auto& s : slots)
      if (s.name == name) return s;
    throw ShapeError("subspace has no slot named " + std::string(name));
  }
};

namespace detail {

template <typename Pred>
SubspaceDescriptor describe(const ToyDepthNet& model, Method method, Pred&& include) {
  SubspaceDescriptor desc;
  desc.method = method;
  for_each_parameter(model, [&](const std::string& name, const Tensor& t, ParamKind kind) {
    if (!include(kind)) return;
    desc.slots.push_back(Slot{name, t.shape(), desc.dim, t.size()});
    desc.dim += t.size();
  });
  return desc;
}

inline std::size_t effective_rank(long requested, std::size_t din, std::size_t dout,
                                  RankPolicy policy, const std::string& layer) {
  if (requested < 1) throw DomainError("rank must be >= 1, got " + std::to_string(requested));
  const auto r = static_cast<std::size_t>(requested);
  const std::size_t limit = std::min(din, dout);
  if (r > limit) {
    if (policy == RankPolicy::strict) {
      throw DomainError("rank " + std::to_string(r) + " exceeds min(" + std::to_string(din) + ", " +
                        std::to_string(dout) + ") of layer " + layer);
    }
    return limit;
  }
  return r;
}

}  // namespace detail

inline SubspaceDescriptor attach_bitfit(const ToyDepthNet& model) {
  return detail::describe(model, Method::bitfit, [](ParamKind k) {
    return k == ParamKind::bias || k == ParamKind::norm_shift;
  });
}

inline SubspaceDescriptor attach_difffit(const ToyDepthNet& model) {
  return detail::describe(model, Method::difffit, [](ParamKind k) {
    return k == ParamKind::bias || k == ParamKind::norm_shift || k == ParamKind::norm_scale ||
           k == ParamKind::gamma;
  });
}

inline SubspaceDescriptor attach_full(const ToyDepthNet& model) {
  return detail::describe(model, Method::full, [](ParamKind k) { return !is_adapter(k); });
}

// Attaches ΔW = A·B to every linear layer with B = 0, so the adapted model
// computes exactly the base function.
inline SubspaceDescriptor attach_lora(ToyDepthNet& model, long rank, std::uint64_t seed,
                                      RankPolicy policy = RankPolicy::cap) {
  std::vector<std::size_t> ranks;
  for_each_linear(model, [&](const std::string& name, Linear& layer) {
    ranks.push_back(detail::effective_rank(rank, layer.din(), layer.dout(), policy, name));
  });
  Rng rng = make_rng(seed, 0x6c6f7261ull);
  std::size_t i = 0;
  for_each_linear(model, [&](const std::string& name, Linear& layer) {
    const std::size_t r = ranks[i++];
    layer.lora = LoRAAdapter{gaussian(Shape{layer.din(), r}, glorot_stddev(layer.din(), r), rng),
                             Tensor(Shape{r, layer.dout()}), name};
  });
  return detail::describe(model, Method::lora, [](ParamKind k) { return k == ParamKind::lora; });
}

// Attaches a Tucker-2 perturbation to every conv layer with U1 = 0.
inline SubspaceDescriptor attach_colora(ToyDepthNet& model, long rank, std::uint64_t seed,
                                        RankPolicy policy = RankPolicy::cap) {
  std::vector<std::size_t> ranks;
  for_each_conv(model, [&](const std::string& name, Conv& layer) {
    ranks.push_back(detail::effective_rank(rank, layer.cin(), layer.cout(), policy, name));
  });
  Rng rng = make_rng(seed, 0x636f6c6f7261ull);
  std::size_t i = 0;
  for_each_conv(model, [&](const std::string& name, Conv& layer) {
    const std::size_t r = ranks[i++];
    const std::size_t k1 = layer.kernel.extent(2), k2 = layer.kernel.extent(3);
    CoLoRAAdapter ad;
    ad.core = gaussian(Shape{r, r, k1, k2}, glorot_stddev(r * k1 * k2, r * k1 * k2), rng);
    ad.u1 = Tensor(Shape{layer.cout(), r});
    ad.u2 = gaussian(Shape{layer.cin(), r}, glorot_stddev(layer.cin(), r), rng);
    ad.layer = name;
    ad.spec = layer.spec;
    layer.colora = std::move(ad);
  });
  return detail::describe(model, Method::colora, [](ParamKind k) { return k == ParamKind::colora; });
}

inline SubspaceDescriptor attach(ToyDepthNet& model, Method method, std::optional<long> rank,
                                 std::uint64_t seed, RankPolicy policy = RankPolicy::cap) {
  if (takes_rank(method) != rank.has_value()) {
    throw DomainError("method " + to_string(method) +
                      (rank ? " does not take a rank" : " requires a rank"));
  }
  switch (method) {
    case Method::bitfit: return attach_bitfit(model);
    case Method::difffit: return attach_difffit(model);
    case Method::lora: return attach_lora(model, *rank, seed, policy);
    case Method::colora: return attach_colora(model, *rank, seed, policy);
    case Method::full: return attach_full(model);
  }
  throw DomainError("unknown method");
}

namespace detail {

template <typename Model, typename Fn>
void for_each_slot(Model& model, const SubspaceDescriptor& desc, Fn&& fn) {
  std::size_t next = 0;
  for_each_parameter(model, [&](const std::string& name, auto& t, ParamKind) {
    if (next < desc.slots.size() && desc.slots[next].name == name) {
      const Slot& s = desc.slots[next];
      if (t.shape() != s.shape) {
        throw ShapeError("slot " + name + " has shape " + to_string(s.shape) +
                         " but parameter has " + to_string(t.shape()));
      }
      fn(s, t);
      ++next;
    }
  });
  if (next != desc.slots.size()) {
    throw ShapeError("subspace slot " + desc.slots[next].name + " not found in model");
  }
}

}  // namespace detail

inline Tensor flatten(const ToyDepthNet& model, const SubspaceDescriptor& desc) {
  Tensor theta(Shape{desc.dim});
  detail::for_each_slot(model, desc, [&](const Slot& s, const Tensor& t) {
    std::copy(t.data().begin(), t.data().end(), theta.data().begin() + s.offset);
  });
  return theta;
}

inline void unflatten(ToyDepthNet& model, const SubspaceDescriptor& desc, const Tensor& theta) {
  if (theta.rank() != 1 || theta.size() != desc.dim) {
    throw ShapeError("unflatten: expected vector of length " + std::to_string(desc.dim) +
                     ", got shape " + to_string(theta.shape()));
  }
  detail::for_each_slot(model, desc, [&](const Slot& s, Tensor& t) {
    std::copy_n(theta.data().begin() + s.offset, s.size, t.data().begin());
  });
}

}  // namespace depthbayes

#endif  // DEPTHBAYES_PEFT_HPP
