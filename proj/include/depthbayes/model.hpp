#ifndef DEPTHBAYES_MODEL_HPP
#define DEPTHBAYES_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "depthbayes/adapters.hpp"
#include "depthbayes/rng.hpp"
#include "depthbayes/tensor.hpp"

namespace depthbayes {

struct ModelConfig {
  static constexpr std::size_t channels = 3;

  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t patch = 4;
  std::size_t embed_dim = 32;
  std::size_t blocks = 2;
  std::size_t mlp_dim = 64;
  std::vector<std::size_t> decoder_channels{16, 8};
  std::uint64_t seed = 0;

  bool operator==(const ModelConfig&) const = default;

  std::size_t grid_h() const { return height / patch; }
  std::size_t grid_w() const { return width / patch; }
  std::size_t tokens() const { return grid_h() * grid_w(); }
  std::size_t patch_dim() const { return channels * patch * patch; }

  void validate() const {
    if (height == 0 || width == 0 || patch == 0 || embed_dim == 0 || blocks == 0 ||
        mlp_dim == 0 || decoder_channels.empty()) {
      throw DomainError("model config: all dimensions must be >= 1");
    }
    for (auto c : decoder_channels)
      if (c == 0) throw DomainError("model config: decoder channels must be >= 1");
    if (height % patch != 0 || width % patch != 0) {
      throw DomainError("model config: image " + std::to_string(height) + "x" +
                        std::to_string(width) + " not divisible by patch " +
                        std::to_string(patch));
    }
  }
};

enum class ParamKind { weight, bias, norm_scale, norm_shift, gamma, lora, colora };

inline bool is_adapter(ParamKind k) { return k == ParamKind::lora || k == ParamKind::colora; }

struct Linear {
  Tensor weight;  // [din, dout]
  Tensor bias;    // [dout]
  std::optional<LoRAAdapter> lora;

  std::size_t din() const { return weight.extent(0); }
  std::size_t dout() const { return weight.extent(1); }
};

struct Conv {
  Tensor kernel;  // [cout, cin, k1, k2]
  Tensor bias;    // [cout]
  ConvSpec spec;
  std::optional<CoLoRAAdapter> colora;

  std::size_t cout() const { return kernel.extent(0); }
  std::size_t cin() const { return kernel.extent(1); }
};

struct LayerNorm {
  Tensor scale;
  Tensor shift;
};

struct Block {
  LayerNorm norm1;
  Linear q, k, v, o;
  Tensor gamma_attn = Tensor(Shape{1}, 1.0);
  LayerNorm norm2;
  Linear fc1, fc2;
  Tensor gamma_mlp = Tensor(Shape{1}, 1.0);
};

// Patch-embedding transformer encoder with a small convolutional head:
// tokens -> blocks -> token grid -> 3x3 convs (GELU) -> nearest upsample ->
// 3x3 conv to one channel -> softplus disparity.
struct ToyDepthNet {
  ModelConfig config;
  Linear patch_embed;
  std::vector<Block> blocks;
  std::vector<Conv> decoder;
  Conv head;
};

// Calls fn(name, tensor, kind) for every parameter in a fixed order. Adapter
// parameters follow the layer they are attached to.
template <typename Model, typename Fn>
  requires std::is_same_v<std::remove_const_t<Model>, ToyDepthNet>
void for_each_parameter(Model& model, Fn&& fn) {
  auto linear = [&](const std::string& name, auto& layer) {
    fn(name + ".weight", layer.weight, ParamKind::weight);
    fn(name + ".bias", layer.bias, ParamKind::bias);
    if (layer.lora) {
      fn(name + ".lora_A", layer.lora->a, ParamKind::lora);
      fn(name + ".lora_B", layer.lora->b, ParamKind::lora);
    }
  };
  auto conv = [&](const std::string& name, auto& layer) {
    fn(name + ".weight", layer.kernel, ParamKind::weight);
    fn(name + ".bias", layer.bias, ParamKind::bias);
    if (layer.colora) {
      fn(name + ".colora_core", layer.colora->core, ParamKind::colora);
      fn(name + ".colora_U1", layer.colora->u1, ParamKind::colora);
      fn(name + ".colora_U2", layer.colora->u2, ParamKind::colora);
    }
  };
  auto norm = [&](const std::string& name, auto& ln) {
    fn(name + ".scale", ln.scale, ParamKind::norm_scale);
    fn(name + ".shift", ln.shift, ParamKind::norm_shift);
  };
  linear("patch_embed", model.patch_embed);
  for (std::size_t i = 0; i < model.blocks.size(); ++i) {
    auto& b = model.blocks[i];
    const std::string p = "blocks." + std::to_string(i);
    norm(p + ".norm1", b.norm1);
    linear(p + ".attn.q", b.q);
    linear(p + ".attn.k", b.k);
    linear(p + ".attn.v", b.v);
    linear(p + ".attn.o", b.o);
    fn(p + ".gamma_attn", b.gamma_attn, ParamKind::gamma);
    norm(p + ".norm2", b.norm2);
    linear(p + ".mlp.fc1", b.fc1);
    linear(p + ".mlp.fc2", b.fc2);
    fn(p + ".gamma_mlp", b.gamma_mlp, ParamKind::gamma);
  }
  for (std::size_t i = 0; i < model.decoder.size(); ++i)
    conv("decoder." + std::to_string(i), model.decoder[i]);
  conv("head", model.head);
}

template <typename Fn>
void for_each_linear(ToyDepthNet& model, Fn&& fn) {
  fn("patch_embed", model.patch_embed);
  for (std::size_t i = 0; i < model.blocks.size(); ++i) {
    auto& b = model.blocks[i];
    const std::string p = "blocks." + std::to_string(i);
    fn(p + ".attn.q", b.q);
    fn(p + ".attn.k", b.k);
    fn(p + ".attn.v", b.v);
    fn(p + ".attn.o", b.o);
    fn(p + ".mlp.fc1", b.fc1);
    fn(p + ".mlp.fc2", b.fc2);
  }
}

template <typename Fn>
void for_each_conv(ToyDepthNet& model, Fn&& fn) {
  for (std::size_t i = 0; i < model.decoder.size(); ++i)
    fn("decoder." + std::to_string(i), model.decoder[i]);
  fn("head", model.head);
}

inline std::size_t parameter_count(const ToyDepthNet& model) {
  std::size_t n = 0;
  for_each_parameter(model, [&](const std::string&, const Tensor& t, ParamKind) { n += t.size(); });
  return n;
}

// Copy of the model with every parameter zeroed, used as a gradient buffer.
inline ToyDepthNet zeros_like(const ToyDepthNet& model) {
  ToyDepthNet g = model;
  for_each_parameter(g, [](const std::string&, Tensor& t, ParamKind) {
    std::fill(t.values().begin(), t.values().end(), 0.0);
  });
  return g;
}

inline ToyDepthNet build_model(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, 0x6d6f64656cull);
  auto linear = [&](std::size_t din, std::size_t dout) {
    return Linear{gaussian(Shape{din, dout}, glorot_stddev(din, dout), rng), Tensor(Shape{dout}),
                  std::nullopt};
  };
  auto conv3 = [&](std::size_t cin, std::size_t cout) {
    return Conv{gaussian(Shape{cout, cin, 3, 3}, glorot_stddev(cin * 9, cout * 9), rng),
                Tensor(Shape{cout}), ConvSpec::uniform(1, 1), std::nullopt};
  };
  auto norm = [&](std::size_t d) { return LayerNorm{Tensor(Shape{d}, 1.0), Tensor(Shape{d})}; };

  ToyDepthNet m;
  m.config = cfg;
  const std::size_t d = cfg.embed_dim;
  m.patch_embed = linear(cfg.patch_dim(), d);
  for (std::size_t i = 0; i < cfg.blocks; ++i) {
    Block b;
    b.norm1 = norm(d);
    b.q = linear(d, d);
    b.k = linear(d, d);
    b.v = linear(d, d);
    b.o = linear(d, d);
    b.norm2 = norm(d);
    b.fc1 = linear(d, cfg.mlp_dim);
    b.fc2 = linear(cfg.mlp_dim, d);
    m.blocks.push_back(std::move(b));
  }
  std::size_t cin = d;
  for (auto c : cfg.decoder_channels) {
    m.decoder.push_back(conv3(cin, c));
    cin = c;
  }
  m.head = conv3(cin, 1);
  return m;
}

// ---------------------------------------------------------------------------
// Layer primitives

namespace layers {

constexpr double layer_norm_eps = 1e-12;

inline double gelu(double z) { return 0.5 * z * (1.0 + std::erf(z / std::sqrt(2.0))); }

inline double gelu_derivative(double z) {
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  return 0.5 * (1.0 + std::erf(z / std::sqrt(2.0))) + z * inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct LinearCache {
  Tensor input;
  Tensor lora_hidden;  // x·A
};

// y = xW + xAB + b for token rows x [n, din].
inline Tensor linear_forward(const Linear& layer, const Tensor& x, LinearCache* cache) {
  Tensor y = matmul(x, layer.weight);
  const std::size_t n = y.extent(0), dout = layer.dout();
  Tensor hidden;
  if (layer.lora) {
    hidden = matmul(x, layer.lora->a);
    y = y + matmul(hidden, layer.lora->b);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dout; ++j) y[i * dout + j] += layer.bias[j];
  if (cache) *cache = LinearCache{x, std::move(hidden)};
  return y;
}

inline Tensor linear_backward(const Linear& layer, const LinearCache& cache, const Tensor& dy,
                              Linear& grad) {
  const std::size_t n = dy.extent(0), dout = layer.dout();
  grad.weight = grad.weight + matmul_tn(cache.input, dy);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dout; ++j) grad.bias[j] += dy[i * dout + j];
  Tensor dx = matmul_nt(dy, layer.weight);
  if (layer.lora) {
    grad.lora->b = grad.lora->b + matmul_tn(cache.lora_hidden, dy);
    const Tensor dhidden = matmul_nt(dy, layer.lora->b);
    grad.lora->a = grad.lora->a + matmul_tn(cache.input, dhidden);
    dx = dx + matmul_nt(dhidden, layer.lora->a);
  }
  return dx;
}

struct LayerNormCache {
  Tensor normalized;  // before the affine map
  std::vector<double> inv_std;
};

inline Tensor normalize_rows(const Tensor& x, LayerNormCache& cache) {
  const std::size_t n = x.extent(0), d = x.extent(1);
  Tensor xhat(x.shape());
  cache.inv_std.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.data().data() + i * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(d);
    const double inv_std = 1.0 / std::sqrt(var + layer_norm_eps);
    cache.inv_std[i] = inv_std;
    for (std::size_t j = 0; j < d; ++j) xhat[i * d + j] = (row[j] - mean) * inv_std;
  }
  return xhat;
}

inline Tensor layer_norm_forward(const LayerNorm& ln, const Tensor& x, LayerNormCache& cache) {
  cache.normalized = normalize_rows(x, cache);
  const std::size_t n = x.extent(0), d = x.extent(1);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      y[i * d + j] = cache.normalized[i * d + j] * ln.scale[j] + ln.shift[j];
  return y;
}

inline Tensor layer_norm_backward(const LayerNorm& ln, const LayerNormCache& cache,
                                  const Tensor& dy, LayerNorm& grad) {
  const std::size_t n = dy.extent(0), d = dy.extent(1);
  Tensor dx(dy.shape());
  std::vector<double> dxhat(d);
  for (std::size_t i = 0; i < n; ++i) {
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double g = dy[i * d + j];
      const double xh = cache.normalized[i * d + j];
      grad.scale[j] += g * xh;
      grad.shift[j] += g;
      dxhat[j] = g * ln.scale[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * xh;
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      dx[i * d + j] = cache.inv_std[i] *
                      (dxhat[j] - mean_dxhat - cache.normalized[i * d + j] * mean_dxhat_xhat);
    }
  }
  return dx;
}

inline void softmax_rows(Tensor& s) {
  const std::size_t n = s.extent(0), m = s.extent(1);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = s.data().data() + i * m;
    const double mx = *std::max_element(row, row + m);
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < m; ++j) row[j] /= sum;
  }
}

struct ConvCache {
  Tensor input;
  std::optional<CoLoRACache> colora;
};

inline Tensor conv_forward(const Conv& layer, const Tensor& x, ConvCache* cache) {
  Tensor y = conv2d(x, layer.kernel, layer.spec, layer.bias);
  std::optional<CoLoRACache> cc;
  if (layer.colora) {
    CoLoRACache c;
    y = y + colora_delta_forward(x, *layer.colora, &c);
    cc = std::move(c);
  }
  if (cache) *cache = ConvCache{x, std::move(cc)};
  return y;
}

inline Tensor conv_backward(const Conv& layer, const ConvCache& cache, const Tensor& dy,
                            Conv& grad) {
  ConvGrads g = conv2d_backward(cache.input, layer.kernel, layer.spec, dy);
  grad.kernel = grad.kernel + g.kernel;
  grad.bias = grad.bias + g.bias;
  if (layer.colora) {
    g.input = g.input + colora_delta_backward(*layer.colora, *cache.colora, dy, *grad.colora);
  }
  return std::move(g.input);
}

}  // namespace layers

// ---------------------------------------------------------------------------
// Forward / backward

struct BlockCache {
  layers::LayerNormCache norm1;
  layers::LinearCache q, k, v, o;
  Tensor queries, keys, values, probs, attn_out;
  layers::LayerNormCache norm2;
  layers::LinearCache fc1, fc2;
  Tensor mlp_pre, mlp_out;
};

struct ForwardCache {
  layers::LinearCache patch_embed;
  std::vector<BlockCache> blocks;
  std::vector<layers::ConvCache> decoder;
  std::vector<Tensor> decoder_pre;
  layers::ConvCache head;
  Tensor head_pre;
};

// Image [3, h, w] to patch rows [tokens, 3·p·p], patch-major then channel, row, col.
inline Tensor extract_patches(const ModelConfig& cfg, const Tensor& x) {
  const std::size_t p = cfg.patch, gh = cfg.grid_h(), gw = cfg.grid_w();
  const std::size_t h = cfg.height, w = cfg.width, pd = cfg.patch_dim();
  Tensor patches(Shape{gh * gw, pd});
  for (std::size_t gy = 0; gy < gh; ++gy)
    for (std::size_t gx = 0; gx < gw; ++gx)
      for (std::size_t c = 0; c < ModelConfig::channels; ++c)
        for (std::size_t dy = 0; dy < p; ++dy)
          for (std::size_t dx = 0; dx < p; ++dx)
            patches[(gy * gw + gx) * pd + (c * p + dy) * p + dx] =
                x[(c * h + gy * p + dy) * w + gx * p + dx];
  return patches;
}

namespace detail {

inline Tensor block_forward(const Block& b, const Tensor& x0, BlockCache* cache) {
  using namespace layers;
  BlockCache local;
  BlockCache& c = cache ? *cache : local;
  const std::size_t n = x0.extent(0), d = x0.extent(1);

  const Tensor h1 = layer_norm_forward(b.norm1, x0, c.norm1);
  c.queries = linear_forward(b.q, h1, &c.q);
  c.keys = linear_forward(b.k, h1, &c.k);
  c.values = linear_forward(b.v, h1, &c.v);
  Tensor scores = matmul_nt(c.queries, c.keys);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (auto& s : scores.values()) s *= scale;
  softmax_rows(scores);
  c.probs = std::move(scores);
  const Tensor mixed = matmul(c.probs, c.values);
  c.attn_out = linear_forward(b.o, mixed, &c.o);
  Tensor x1 = x0;
  const double ga = b.gamma_attn[0];
  for (std::size_t i = 0; i < n * d; ++i) x1[i] += ga * c.attn_out[i];

  const Tensor h2 = layer_norm_forward(b.norm2, x1, c.norm2);
  c.mlp_pre = linear_forward(b.fc1, h2, &c.fc1);
  Tensor act = c.mlp_pre;
  for (auto& v : act.values()) v = gelu(v);
  c.mlp_out = linear_forward(b.fc2, act, &c.fc2);
  Tensor x2 = std::move(x1);
  const double gm = b.gamma_mlp[0];
  for (std::size_t i = 0; i < n * d; ++i) x2[i] += gm * c.mlp_out[i];
  return x2;
}

inline Tensor block_backward(const Block& b, const BlockCache& c, const Tensor& dx2, Block& g) {
  using namespace layers;
  const std::size_t n = dx2.extent(0), d = dx2.extent(1);

  double dgm = 0.0;
  for (std::size_t i = 0; i < n * d; ++i) dgm += dx2[i] * c.mlp_out[i];
  g.gamma_mlp[0] += dgm;
  const Tensor dmlp = b.gamma_mlp[0] * dx2;
  Tensor dact = linear_backward(b.fc2, c.fc2, dmlp, g.fc2);
  for (std::size_t i = 0; i < dact.size(); ++i) dact[i] *= gelu_derivative(c.mlp_pre[i]);
  const Tensor dh2 = linear_backward(b.fc1, c.fc1, dact, g.fc1);
  const Tensor dx1 = dx2 + layer_norm_backward(b.norm2, c.norm2, dh2, g.norm2);

  double dga = 0.0;
  for (std::size_t i = 0; i < n * d; ++i) dga += dx1[i] * c.attn_out[i];
  g.gamma_attn[0] += dga;
  const Tensor dattn = b.gamma_attn[0] * dx1;
  const Tensor dmixed = linear_backward(b.o, c.o, dattn, g.o);

  const Tensor dprobs = matmul_nt(dmixed, c.values);
  const Tensor dvalues = matmul_tn(c.probs, dmixed);
  const std::size_t t = c.probs.extent(0);
  Tensor dscores(c.probs.shape());
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < t; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < t; ++j) dot += dprobs[i * t + j] * c.probs[i * t + j];
    for (std::size_t j = 0; j < t; ++j)
      dscores[i * t + j] = c.probs[i * t + j] * (dprobs[i * t + j] - dot) * scale;
  }
  const Tensor dqueries = matmul(dscores, c.keys);
  const Tensor dkeys = matmul_tn(dscores, c.queries);
  Tensor dh1 = linear_backward(b.q, c.q, dqueries, g.q);
  dh1 = dh1 + linear_backward(b.k, c.k, dkeys, g.k);
  dh1 = dh1 + linear_backward(b.v, c.v, dvalues, g.v);
  return dx1 + layer_norm_backward(b.norm1, c.norm1, dh1, g.norm1);
}

inline Tensor upsample_nearest(const Tensor& x, std::size_t factor) {
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t oh = h * factor, ow = w * factor;
  Tensor y(Shape{c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t r = 0; r < oh; ++r)
      for (std::size_t q = 0; q < ow; ++q)
        y[(ch * oh + r) * ow + q] = x[(ch * h + r / factor) * w + q / factor];
  return y;
}

inline Tensor upsample_nearest_backward(const Tensor& dy, std::size_t factor) {
  const std::size_t c = dy.extent(0), oh = dy.extent(1), ow = dy.extent(2);
  const std::size_t h = oh / factor, w = ow / factor;
  Tensor dx(Shape{c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t r = 0; r < oh; ++r)
      for (std::size_t q = 0; q < ow; ++q)
        dx[(ch * h + r / factor) * w + q / factor] += dy[(ch * oh + r) * ow + q];
  return dx;
}

}  // namespace detail

inline Tensor forward(const ToyDepthNet& model, const Tensor& x, ForwardCache* cache) {
  const ModelConfig& cfg = model.config;
  require_shape(x, Shape{ModelConfig::channels, cfg.height, cfg.width}, "forward input");
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.blocks.resize(model.blocks.size());
  c.decoder.resize(model.decoder.size());
  c.decoder_pre.resize(model.decoder.size());

  Tensor tokens = layers::linear_forward(model.patch_embed, extract_patches(cfg, x),
                                         cache ? &c.patch_embed : nullptr);
  for (std::size_t i = 0; i < model.blocks.size(); ++i)
    tokens = detail::block_forward(model.blocks[i], tokens, cache ? &c.blocks[i] : nullptr);

  Tensor fmap = transpose(tokens).reshaped(Shape{cfg.embed_dim, cfg.grid_h(), cfg.grid_w()});
  for (std::size_t i = 0; i < model.decoder.size(); ++i) {
    Tensor pre = layers::conv_forward(model.decoder[i], fmap, cache ? &c.decoder[i] : nullptr);
    fmap = pre;
    for (auto& v : fmap.values()) v = layers::gelu(v);
    if (cache) c.decoder_pre[i] = std::move(pre);
  }
  const Tensor up = detail::upsample_nearest(fmap, cfg.patch);
  Tensor out = layers::conv_forward(model.head, up, cache ? &c.head : nullptr);
  if (cache) c.head_pre = out;
  for (auto& v : out.values()) v = layers::softplus(v);
  return out;
}

// Disparity map [1, h, w], strictly positive.
inline Tensor forward(const ToyDepthNet& model, const Tensor& x) {
  return forward(model, x, nullptr);
}

// Accumulates parameter gradients of <d_out, forward(x)> into `grad`.
inline void backward(const ToyDepthNet& model, const ForwardCache& c, const Tensor& d_out,
                     ToyDepthNet& grad) {
  const ModelConfig& cfg = model.config;
  require_shape(d_out, Shape{1, cfg.height, cfg.width}, "backward upstream");
  Tensor dpre = d_out;
  for (std::size_t i = 0; i < dpre.size(); ++i) dpre[i] *= layers::sigmoid(c.head_pre[i]);
  Tensor dup = layers::conv_backward(model.head, c.head, dpre, grad.head);
  Tensor dfmap = detail::upsample_nearest_backward(dup, cfg.patch);
  for (std::size_t i = model.decoder.size(); i-- > 0;) {
    for (std::size_t j = 0; j < dfmap.size(); ++j)
      dfmap[j] *= layers::gelu_derivative(c.decoder_pre[i][j]);
    dfmap = layers::conv_backward(model.decoder[i], c.decoder[i], dfmap, grad.decoder[i]);
  }
  Tensor dtokens = transpose(dfmap.reshaped(Shape{cfg.embed_dim, cfg.tokens()}));
  for (std::size_t i = model.blocks.size(); i-- > 0;)
    dtokens = detail::block_backward(model.blocks[i], c.blocks[i], dtokens, grad.blocks[i]);
  layers::linear_backward(model.patch_embed, c.patch_embed, dtokens, grad.patch_embed);
}

}  // namespace depthbayes

#endif  // DEPTHBAYES_MODEL_HPP
