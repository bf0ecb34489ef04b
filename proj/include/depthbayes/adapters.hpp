#ifndef DEPTHBAYES_ADAPTERS_HPP
#define DEPTHBAYES_ADAPTERS_HPP

#include <string>

#include "depthbayes/tensor.hpp"
#include "depthbayes/tucker.hpp"

namespace depthbayes {

// Low-rank perturbation ΔW = A·B of a linear weight W [din, dout].
struct LoRAAdapter {
  Tensor a;  // [din, r]
  Tensor b;  // [r, dout]
  std::string layer;

  std::size_t rank() const { return a.extent(1); }
  Tensor delta() const { return matmul(a, b); }
};

// Tucker-2 perturbation ΔW = C ×₁ U1 ×₂ U2 of a conv kernel [cout, cin, k1, k2].
struct CoLoRAAdapter {
  Tensor core;  // [r, r, k1, k2]
  Tensor u1;    // [cout, r]
  Tensor u2;    // [cin, r]
  std::string layer;
  ConvSpec spec;

  std::size_t rank() const { return core.extent(0); }

  TuckerFactors factors() const {
    return TuckerFactors{core, {u1, u2, IdentityMode{}, IdentityMode{}}};
  }
  Tensor delta() const { return tucker_reconstruct(factors()); }
};

inline void validate(const CoLoRAAdapter& ad) {
  require_rank(ad.core, 4, "colora core");
  require_rank(ad.u1, 2, "colora U1");
  require_rank(ad.u2, 2, "colora U2");
  const std::size_t r = ad.core.extent(0);
  if (ad.core.extent(1) != r || ad.u1.extent(1) != r || ad.u2.extent(1) != r) {
    throw ShapeError("colora: inconsistent ranks core " + to_string(ad.core.shape()) + ", U1 " +
                     to_string(ad.u1.shape()) + ", U2 " + to_string(ad.u2.shape()));
  }
}

// U2 [cin, r] as a 1x1 kernel [r, cin, 1, 1]: z_b = sum_j U2[j, b] x_j.
inline Tensor unsqueeze_input_factor(const Tensor& u2) {
  return transpose(u2).reshaped(Shape{u2.extent(1), u2.extent(0), 1, 1});
}

// U1 [cout, r] as a 1x1 kernel [cout, r, 1, 1].
inline Tensor unsqueeze_output_factor(const Tensor& u1) {
  return u1.reshaped(Shape{u1.extent(0), u1.extent(1), 1, 1});
}

struct CoLoRACache {
  Tensor input;
  Tensor projected;  // after the U2 1x1 conv, [r, h, w]
  Tensor mixed;      // after the core conv, [r, h', w']
};

inline Tensor colora_delta_forward(const Tensor& x, const CoLoRAAdapter& ad,
                                   CoLoRACache* cache) {
  validate(ad);
  require_rank(x, 3, "colora input");
  if (x.extent(0) != ad.u2.extent(0)) {
    throw ShapeError("colora: adapter expects " + std::to_string(ad.u2.extent(0)) +
                     " input channels, got " + std::to_string(x.extent(0)));
  }
  const ConvSpec pointwise;
  Tensor z = conv2d(x, unsqueeze_input_factor(ad.u2), pointwise);
  Tensor w = conv2d(z, ad.core, ad.spec);
  Tensor y = conv2d(w, unsqueeze_output_factor(ad.u1), pointwise);
  if (cache) *cache = CoLoRACache{x, std::move(z), std::move(w)};
  return y;
}

// Perturbation branch h(x, ρ) ⋆_δ ΔW evaluated as three chained convolutions
// (cin→r pointwise, r→r core at the layer's stride/padding, r→cout pointwise);
// ΔW itself is never formed.
inline Tensor colora_delta_forward(const Tensor& x, const CoLoRAAdapter& ad) {
  return colora_delta_forward(x, ad, nullptr);
}

// Accumulates adapter gradients into `grad` and returns the input gradient of
// the perturbation branch.
inline Tensor colora_delta_backward(const CoLoRAAdapter& ad, const CoLoRACache& cache,
                                    const Tensor& dy, CoLoRAAdapter& grad) {
  const ConvSpec pointwise;
  const ConvGrads g_out = conv2d_backward(cache.mixed, unsqueeze_output_factor(ad.u1), pointwise, dy);
  const ConvGrads g_core = conv2d_backward(cache.projected, ad.core, ad.spec, g_out.input);
  const ConvGrads g_in =
      conv2d_backward(cache.input, unsqueeze_input_factor(ad.u2), pointwise, g_core.input);
  grad.u1 = grad.u1 + g_out.kernel.reshaped(ad.u1.shape());
  grad.core = grad.core + g_core.kernel;
  grad.u2 = grad.u2 + transpose(g_in.kernel.reshaped(Shape{ad.u2.extent(1), ad.u2.extent(0)}));
  return g_in.input;
}

}  // namespace depthbayes

#endif  // DEPTHBAYES_ADAPTERS_HPP
