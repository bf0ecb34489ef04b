#ifndef DEPTHBAYES_TENSOR_HPP
#define DEPTHBAYES_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace depthbayes {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

using Shape = std::vector<std::size_t>;

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

// Dense row-major binary64 array. A default-constructed tensor is a rank-0
// scalar holding 0.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    check_extents();
  }

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (data_.size() != shape_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + depthbayes::to_string(shape_));
    }
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

  static Tensor vector(std::initializer_list<double> values) {
    return Tensor(Shape{values.size()}, std::vector<double>(values));
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor(Shape{r, c}, std::move(data));
  }

  static Tensor identity(std::size_t n) {
    Tensor t(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t dim) const {
    if (dim >= shape_.size()) {
      throw ShapeError("dimension " + std::to_string(dim) + " out of range for shape " +
                       depthbayes::to_string(shape_));
    }
    return shape_[dim];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  template <typename... Idx>
  double& at(Idx... idx) {
    return data_[offset(idx...)];
  }
  template <typename... Idx>
  double at(Idx... idx) const {
    return data_[offset(idx...)];
  }

  Tensor reshaped(Shape shape) const {
    return Tensor(std::move(shape), data_);
  }

  bool operator==(const Tensor&) const = default;

 private:
  void check_extents() const {
    for (auto e : shape_) {
      if (e == 0) {
        throw ShapeError("zero extent in shape " + depthbayes::to_string(shape_));
      }
    }
  }

  template <typename... Idx>
  std::size_t offset(Idx... idx) const {
    const std::size_t index[] = {static_cast<std::size_t>(idx)...};
    std::size_t off = 0;
    for (std::size_t d = 0; d < sizeof...(Idx); ++d) off = off * shape_[d] + index[d];
    return off;
  }

  Shape shape_;
  std::vector<double> data_;
};

inline void require_shape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw ShapeError(std::string(what) + ": expected shape " + to_string(expected) +
                     ", got " + to_string(t.shape()));
  }
}

inline void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + to_string(t.shape()));
  }
}

inline Tensor operator+(Tensor a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline Tensor operator-(Tensor a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("sub: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

inline Tensor operator*(double s, Tensor a) {
  for (auto& v : a.values()) v *= s;
  return a;
}

inline double frobenius_norm(const Tensor& a) {
  double sum = 0.0;
  for (double v : a.data()) sum += v * v;
  return std::sqrt(sum);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool all_finite(const Tensor& a) {
  return std::all_of(a.data().begin(), a.data().end(),
                     [](double v) { return std::isfinite(v); });
}

// a [m,k] * b [k,n]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  if (b.extent(0) != k) {
    throw ShapeError("matmul: inner extents differ " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  }
  Tensor c(Shape{m, n});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return c;
}

// aᵀ [k,m]ᵀ * b [k,n] -> [m,n]
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_tn lhs");
  require_rank(b, 2, "matmul_tn rhs");
  const std::size_t k = a.extent(0), m = a.extent(1), n = b.extent(1);
  if (b.extent(0) != k) {
    throw ShapeError("matmul_tn: leading extents differ " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  Tensor c(Shape{m, n});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = pb + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = pa[p * m + i];
      if (av == 0.0) continue;
      double* row = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return c;
}

// a [m,k] * bᵀ [n,k]ᵀ -> [m,n]
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_nt lhs");
  require_rank(b, 2, "matmul_nt rhs");
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(0);
  if (b.extent(1) != k) {
    throw ShapeError("matmul_nt: trailing extents differ " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  Tensor c(Shape{m, n});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = pb + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      pc[i * n + j] = s;
    }
  }
  return c;
}

inline Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.extent(0), c = a.extent(1);
  Tensor t(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) t[j * r + i] = a[i * c + j];
  return t;
}

// ---------------------------------------------------------------------------
// Convolution

struct ConvSpec {
  std::size_t stride[2] = {1, 1};
  std::size_t padding[2] = {0, 0};

  static ConvSpec uniform(std::size_t stride, std::size_t padding) {
    ConvSpec s;
    s.stride[0] = s.stride[1] = stride;
    s.padding[0] = s.padding[1] = padding;
    return s;
  }

  bool operator==(const ConvSpec&) const = default;
};

inline std::size_t conv_output_extent(std::size_t in, std::size_t k, std::size_t stride,
                                      std::size_t pad) {
  if (stride == 0) throw DomainError("conv2d: stride must be positive");
  const std::size_t padded = in + 2 * pad;
  if (padded < k) {
    throw DomainError("conv2d: kernel extent " + std::to_string(k) +
                      " exceeds padded input extent " + std::to_string(padded));
  }
  return (padded - k) / stride + 1;
}

namespace detail {

inline void check_conv_shapes(const Tensor& x, const Tensor& kernel) {
  require_rank(x, 3, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  if (kernel.extent(1) != x.extent(0)) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.extent(1)) +
                     " input channels, input has " + std::to_string(x.extent(0)));
  }
}

}  // namespace detail

// y_o = b_o + sum_i pad(x)_i (*)_stride K_oi, cross-correlation, zero padding.
inline Tensor conv2d(const Tensor& x, const Tensor& kernel, const ConvSpec& spec,
                     const Tensor* bias = nullptr) {
  detail::check_conv_shapes(x, kernel);
  const std::size_t cin = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t cout = kernel.extent(0), k1 = kernel.extent(2), k2 = kernel.extent(3);
  const std::size_t oh = conv_output_extent(h, k1, spec.stride[0], spec.padding[0]);
  const std::size_t ow = conv_output_extent(w, k2, spec.stride[1], spec.padding[1]);
  if (bias) require_shape(*bias, Shape{cout}, "conv2d bias");

  Tensor y(Shape{cout, oh, ow});
  const double* px = x.data().data();
  const double* pk = kernel.data().data();
  double* py = y.data().data();
  const auto s0 = static_cast<std::ptrdiff_t>(spec.stride[0]);
  const auto s1 = static_cast<std::ptrdiff_t>(spec.stride[1]);
  const auto p0 = static_cast<std::ptrdiff_t>(spec.padding[0]);
  const auto p1 = static_cast<std::ptrdiff_t>(spec.padding[1]);
  const auto ih = static_cast<std::ptrdiff_t>(h), iw = static_cast<std::ptrdiff_t>(w);

  for (std::size_t o = 0; o < cout; ++o) {
    double* yo = py + o * oh * ow;
    if (bias) std::fill(yo, yo + oh * ow, (*bias)[o]);
    for (std::size_t i = 0; i < cin; ++i) {
      const double* xi = px + i * h * w;
      for (std::size_t a = 0; a < k1; ++a) {
        for (std::size_t b = 0; b < k2; ++b) {
          const double kv = pk[((o * cin + i) * k1 + a) * k2 + b];
          if (kv == 0.0) continue;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s0 +
                                      static_cast<std::ptrdiff_t>(a) - p0;
            if (iy < 0 || iy >= ih) continue;
            const double* xrow = xi + iy * iw;
            double* yrow = yo + oy * ow;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * s1 +
                                        static_cast<std::ptrdiff_t>(b) - p1;
              if (ix < 0 || ix >= iw) continue;
              yrow[ox] += kv * xrow[ix];
            }
          }
        }
      }
    }
  }
  return y;
}

inline Tensor conv2d(const Tensor& x, const Tensor& kernel, const ConvSpec& spec,
                     const Tensor& bias) {
  return conv2d(x, kernel, spec, &bias);
}

struct ConvGrads {
  Tensor input;
  Tensor kernel;
  Tensor bias;
};

// Vector-Jacobian product of conv2d for an upstream gradient dy.
inline ConvGrads conv2d_backward(const Tensor& x, const Tensor& kernel, const ConvSpec& spec,
                                 const Tensor& dy) {
  detail::check_conv_shapes(x, kernel);
  const std::size_t cin = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t cout = kernel.extent(0), k1 = kernel.extent(2), k2 = kernel.extent(3);
  const std::size_t oh = conv_output_extent(h, k1, spec.stride[0], spec.padding[0]);
  const std::size_t ow = conv_output_extent(w, k2, spec.stride[1], spec.padding[1]);
  require_shape(dy, Shape{cout, oh, ow}, "conv2d_backward upstream");

  ConvGrads g{Tensor(x.shape()), Tensor(kernel.shape()), Tensor(Shape{cout})};
  const double* px = x.data().data();
  const double* pk = kernel.data().data();
  const double* pdy = dy.data().data();
  double* pdx = g.input.data().data();
  double* pdk = g.kernel.data().data();
  const auto s0 = static_cast<std::ptrdiff_t>(spec.stride[0]);
  const auto s1 = static_cast<std::ptrdiff_t>(spec.stride[1]);
  const auto p0 = static_cast<std::ptrdiff_t>(spec.padding[0]);
  const auto p1 = static_cast<std::ptrdiff_t>(spec.padding[1]);
  const auto ih = static_cast<std::ptrdiff_t>(h), iw = static_cast<std::ptrdiff_t>(w);

  for (std::size_t o = 0; o < cout; ++o) {
    const double* dyo = pdy + o * oh * ow;
    double bsum = 0.0;
    for (std::size_t q = 0; q < oh * ow; ++q) bsum += dyo[q];
    g.bias[o] = bsum;
    for (std::size_t i = 0; i < cin; ++i) {
      const double* xi = px + i * h * w;
      double* dxi = pdx + i * h * w;
      for (std::size_t a = 0; a < k1; ++a) {
        for (std::size_t b = 0; b < k2; ++b) {
          const std::size_t kidx = ((o * cin + i) * k1 + a) * k2 + b;
          const double kv = pk[kidx];
          double ksum = 0.0;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s0 +
                                      static_cast<std::ptrdiff_t>(a) - p0;
            if (iy < 0 || iy >= ih) continue;
            const double* xrow = xi + iy * iw;
            double* dxrow = dxi + iy * iw;
            const double* dyrow = dyo + oy * ow;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * s1 +
                                        static_cast<std::ptrdiff_t>(b) - p1;
              if (ix < 0 || ix >= iw) continue;
              ksum += dyrow[ox] * xrow[ix];
              dxrow[ix] += kv * dyrow[ox];
            }
          }
          pdk[kidx] = ksum;
        }
      }
    }
  }
  return g;
}

// Zero padding of the two trailing spatial dims of a [c,h,w] tensor.
inline Tensor zero_pad(const Tensor& x, std::size_t pad_h, std::size_t pad_w) {
  require_rank(x, 3, "zero_pad");
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t ph = h + 2 * pad_h, pw = w + 2 * pad_w;
  Tensor y(Shape{c, ph, pw});
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t r = 0; r < h; ++r)
      std::copy_n(x.data().data() + (i * h + r) * w, w,
                  y.data().data() + (i * ph + r + pad_h) * pw + pad_w);
  return y;
}

// ---------------------------------------------------------------------------
// Mode-n matricization and products

inline Tensor mode_unfold(const Tensor& a, std::size_t mode) {
  if (mode >= a.rank()) {
    throw DomainError("mode_unfold: mode " + std::to_string(mode) + " out of range for rank " +
                      std::to_string(a.rank()));
  }
  const auto& shape = a.shape();
  const std::size_t left = shape_size(Shape(shape.begin(), shape.begin() + mode));
  const std::size_t hm = shape[mode];
  const std::size_t right = shape_size(Shape(shape.begin() + mode + 1, shape.end()));
  Tensor m(Shape{hm, left * right});
  for (std::size_t l = 0; l < left; ++l)
    for (std::size_t j = 0; j < hm; ++j)
      for (std::size_t r = 0; r < right; ++r)
        m[j * left * right + l * right + r] = a[(l * hm + j) * right + r];
  return m;
}

inline Tensor mode_fold(const Tensor& m, std::size_t mode, const Shape& shape) {
  if (mode >= shape.size()) {
    throw DomainError("mode_fold: mode " + std::to_string(mode) + " out of range for rank " +
                      std::to_string(shape.size()));
  }
  const std::size_t left = shape_size(Shape(shape.begin(), shape.begin() + mode));
  const std::size_t hm = shape[mode];
  const std::size_t right = shape_size(Shape(shape.begin() + mode + 1, shape.end()));
  require_shape(m, Shape{hm, left * right}, "mode_fold");
  Tensor a(shape);
  for (std::size_t l = 0; l < left; ++l)
    for (std::size_t j = 0; j < hm; ++j)
      for (std::size_t r = 0; r < right; ++r)
        a[(l * hm + j) * right + r] = m[j * left * right + l * right + r];
  return a;
}

// b[..., k, ...] = sum_j m[k, j] a[..., j, ...] along `mode`.
inline Tensor mode_product(const Tensor& a, const Tensor& m, std::size_t mode) {
  if (mode >= a.rank()) {
    throw DomainError("mode_product: mode " + std::to_string(mode) + " out of range for rank " +
                      std::to_string(a.rank()));
  }
  require_rank(m, 2, "mode_product factor");
  const auto& shape = a.shape();
  const std::size_t hm = shape[mode];
  if (m.extent(1) != hm) {
    throw ShapeError("mode_product: factor " + to_string(m.shape()) + " does not match extent " +
                     std::to_string(hm) + " of mode " + std::to_string(mode));
  }
  const std::size_t r = m.extent(0);
  const std::size_t left = shape_size(Shape(shape.begin(), shape.begin() + mode));
  const std::size_t right = shape_size(Shape(shape.begin() + mode + 1, shape.end()));
  Shape out_shape = shape;
  out_shape[mode] = r;
  Tensor b(out_shape);
  for (std::size_t l = 0; l < left; ++l) {
    for (std::size_t k = 0; k < r; ++k) {
      double* dst = b.data().data() + (l * r + k) * right;
      for (std::size_t j = 0; j < hm; ++j) {
        const double mv = m[k * hm + j];
        if (mv == 0.0) continue;
        const double* src = a.data().data() + (l * hm + j) * right;
        for (std::size_t q = 0; q < right; ++q) dst[q] += mv * src[q];
      }
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// SVD (one-sided Jacobi)

struct Svd {
  Tensor u;  // [p,p]
  Tensor s;  // [min(p,q)]
  Tensor v;  // [q,q]
};

namespace detail {

// Extends the leading `filled` orthonormal columns of the n x n row-major
// matrix q to a full orthonormal basis by Gram-Schmidt against unit vectors.
inline void complete_basis(std::vector<double>& q, std::size_t n, std::size_t filled) {
  std::size_t col = filled;
  for (std::size_t e = 0; e < n && col < n; ++e) {
    std::vector<double> cand(n, 0.0);
    cand[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t c = 0; c < col; ++c) {
        double dot = 0.0;
        for (std::size_t r = 0; r < n; ++r) dot += q[r * n + c] * cand[r];
        for (std::size_t r = 0; r < n; ++r) cand[r] -= dot * q[r * n + c];
      }
    }
    double norm = 0.0;
    for (double v : cand) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (std::size_t r = 0; r < n; ++r) q[r * n + col] = cand[r] / norm;
    ++col;
  }
}

// Hestenes one-sided Jacobi for p >= q.
inline Svd jacobi_svd_tall(const Tensor& m) {
  const std::size_t p = m.extent(0), q = m.extent(1);
  // Column-major working copy: cols[j] is column j.
  std::vector<std::vector<double>> cols(q, std::vector<double>(p));
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) cols[j][i] = m[i * q + j];
  std::vector<std::vector<double>> vcols(q, std::vector<double>(q, 0.0));
  for (std::size_t j = 0; j < q; ++j) vcols[j][j] = 1.0;

  constexpr int max_sweeps = 100;
  constexpr double tol = 1e-15;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < q; ++i) {
      for (std::size_t j = i + 1; j < q; ++j) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t r = 0; r < p; ++r) {
          alpha += cols[i][r] * cols[i][r];
          beta += cols[j][r] * cols[j][r];
          gamma += cols[i][r] * cols[j][r];
        }
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t r = 0; r < p; ++r) {
          const double ai = cols[i][r], aj = cols[j][r];
          cols[i][r] = c * ai - s * aj;
          cols[j][r] = s * ai + c * aj;
        }
        for (std::size_t r = 0; r < q; ++r) {
          const double vi = vcols[i][r], vj = vcols[j][r];
          vcols[i][r] = c * vi - s * vj;
          vcols[j][r] = s * vi + c * vj;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(q);
  for (std::size_t j = 0; j < q; ++j) {
    double n2 = 0.0;
    for (double v : cols[j]) n2 += v * v;
    sigma[j] = std::sqrt(n2);
  }
  std::vector<std::size_t> order(q);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  const double smax = q ? sigma[order[0]] : 0.0;
  const double zero_tol = std::max(smax, 1.0) * 1e-14 * static_cast<double>(std::max(p, q));

  std::vector<double> u(p * p, 0.0);
  Tensor s(Shape{q});
  Tensor v(Shape{q, q});
  std::size_t filled = 0;
  for (std::size_t k = 0; k < q; ++k) {
    const std::size_t j = order[k];
    s[k] = sigma[j];
    for (std::size_t r = 0; r < q; ++r) v[r * q + k] = vcols[j][r];
    if (sigma[j] > zero_tol && filled == k) {
      for (std::size_t r = 0; r < p; ++r) u[r * p + k] = cols[j][r] / sigma[j];
      ++filled;
    }
  }
  complete_basis(u, p, filled);
  return Svd{Tensor(Shape{p, p}, std::move(u)), std::move(s), std::move(v)};
}

}  // namespace detail

// Full SVD m = U diag(s) Vᵀ with s non-increasing.
inline Svd svd(const Tensor& m) {
  require_rank(m, 2, "svd");
  if (!all_finite(m)) throw DomainError("svd: non-finite input");
  if (m.extent(0) >= m.extent(1)) return detail::jacobi_svd_tall(m);
  Svd t = detail::jacobi_svd_tall(transpose(m));
  return Svd{std::move(t.v), std::move(t.s), std::move(t.u)};
}

}  // namespace depthbayes

#endif  // DEPTHBAYES_TENSOR_HPP
