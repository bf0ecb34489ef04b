#ifndef DEPTHBAYES_TUCKER_HPP
#define DEPTHBAYES_TUCKER_HPP

#include <variant>
#include <vector>

#include "depthbayes/tensor.hpp"

namespace depthbayes {

// Marks a mode that is not decomposed; behaves as U = I with r = h.
struct IdentityMode {
  bool operator==(const IdentityMode&) const = default;
};

using TuckerFactor = std::variant<IdentityMode, Tensor>;

struct TuckerFactors {
  Tensor core;
  std::vector<TuckerFactor> factors;  // factor i is [h_i, r_i] or IdentityMode

  bool is_identity(std::size_t mode) const {
    return std::holds_alternative<IdentityMode>(factors.at(mode));
  }
  const Tensor& factor(std::size_t mode) const { return std::get<Tensor>(factors.at(mode)); }

  Shape reconstructed_shape() const {
    Shape shape = core.shape();
    for (std::size_t i = 0; i < factors.size(); ++i)
      if (!is_identity(i)) shape[i] = factor(i).extent(0);
    return shape;
  }
};

struct ModeRank {
  std::size_t mode;
  long rank;
};

inline void validate(const TuckerFactors& f) {
  if (f.factors.size() != f.core.rank()) {
    throw ShapeError("tucker: " + std::to_string(f.factors.size()) + " factors for core of shape " +
                     to_string(f.core.shape()));
  }
  for (std::size_t i = 0; i < f.factors.size(); ++i) {
    if (f.is_identity(i)) continue;
    const Tensor& u = f.factor(i);
    require_rank(u, 2, "tucker factor");
    if (u.extent(1) != f.core.extent(i)) {
      throw ShapeError("tucker: factor " + std::to_string(i) + " has shape " +
                       to_string(u.shape()) + " but core extent is " +
                       std::to_string(f.core.extent(i)));
    }
    if (u.extent(1) > u.extent(0)) {
      throw ShapeError("tucker: factor " + std::to_string(i) + " rank " +
                       std::to_string(u.extent(1)) + " exceeds extent " +
                       std::to_string(u.extent(0)));
    }
  }
}

inline Tensor tucker_reconstruct(const TuckerFactors& f) {
  validate(f);
  Tensor a = f.core;
  for (std::size_t i = 0; i < f.factors.size(); ++i)
    if (!f.is_identity(i)) a = mode_product(a, f.factor(i), i);
  return a;
}

// Truncated HOSVD. Modes absent from `ranks` are left undecomposed.
inline TuckerFactors tucker_decompose(const Tensor& a, const std::vector<ModeRank>& ranks) {
  TuckerFactors f;
  f.factors.assign(a.rank(), IdentityMode{});
  for (const auto& mr : ranks) {
    if (mr.mode >= a.rank()) {
      throw DomainError("tucker_decompose: mode " + std::to_string(mr.mode) +
                        " out of range for rank " + std::to_string(a.rank()));
    }
    if (mr.rank <= 0) {
      throw DomainError("tucker_decompose: rank must be positive, got " + std::to_string(mr.rank));
    }
    const auto r = static_cast<std::size_t>(mr.rank);
    const std::size_t h = a.extent(mr.mode);
    if (r > h) {
      throw DomainError("tucker_decompose: rank " + std::to_string(r) + " exceeds extent " +
                        std::to_string(h) + " of mode " + std::to_string(mr.mode));
    }
    const Svd d = svd(mode_unfold(a, mr.mode));
    Tensor u(Shape{h, r});
    for (std::size_t c = 0; c < r; ++c) {
      // Largest-magnitude entry of each column is made non-negative.
      std::size_t arg = 0;
      for (std::size_t row = 1; row < h; ++row)
        if (std::abs(d.u[row * h + c]) > std::abs(d.u[arg * h + c])) arg = row;
      const double sign = d.u[arg * h + c] < 0.0 ? -1.0 : 1.0;
      for (std::size_t row = 0; row < h; ++row) u[row * r + c] = sign * d.u[row * h + c];
    }
    f.factors[mr.mode] = std::move(u);
  }
  Tensor core = a;
  for (std::size_t i = 0; i < f.factors.size(); ++i)
    if (!f.is_identity(i)) core = mode_product(core, transpose(f.factor(i)), i);
  f.core = std::move(core);
  return f;
}

}  // namespace depthbayes

#endif  // DEPTHBAYES_TUCKER_HPP
