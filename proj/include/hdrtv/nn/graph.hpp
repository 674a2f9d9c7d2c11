#pragma once
#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <string>
#include <type_traits>

#include "hdrtv/nn/blas.hpp"
#include "hdrtv/nn/tensor.hpp"
#include "hdrtv/rng.hpp"

namespace hdrtv::nn {

// Eager-forward tape. Every op computes its output immediately and pushes a
// closure that adds into the input gradients, so backward() is just the tape
// replayed in reverse. Gradients always accumulate: a tensor feeding several
// ops, or a weight shared across call sites, collects the sum automatically.
template <typename T>
class Graph {
 public:
  bool train = false;      // enables dropout
  bool check_nan = false;  // scan every op output, report the first bad op
  bool no_grad = false;    // forward only: outputs carry no gradient buffer

  // Distance from the nearest kink of a piecewise-linear op (relu, |.|ᵢ in
  // the l1 loss) seen during forward. Finite differencing is only trusted
  // when the probe stays on one linear piece; see grad_check. Tracked only
  // by the double instantiation, the precision the checker probes in; the
  // scan would be pure overhead on float training graphs.
  double min_kink = std::numeric_limits<double>::infinity();

  // Op outputs skip the zero fill: every op overwrites all of its output's
  // values before anyone reads them, and that contract is what makes this
  // allocation path safe. An op that left gaps would leak stale data.
  TensorPtr<T> node(std::vector<int> shape) {
    return std::make_shared<Tensor<T>>(std::move(shape), Tensor<T>::Fill::raw, !no_grad);
  }

  void tape(std::function<void()> fn) { tape_.push_back(std::move(fn)); }

  void note_kink(double d) {
    if (d < min_kink) min_kink = d;
  }

  void after_op(const char* name, const TensorPtr<T>& y) {
    ++op_count_;
    if (!check_nan) return;
    for (std::size_t i = 0; i < y->v.size(); ++i) {
      if (!std::isfinite(static_cast<double>(y->v[i])))
        fail(Errc::numeric, "non-finite activation after op #" + std::to_string(op_count_) +
                                " (" + name + ") at element " + std::to_string(i));
    }
  }

  void backward(const TensorPtr<T>& loss) {
    if (no_grad) fail(Errc::invalid_argument, "backward on a no_grad graph");
    if (loss->numel() != 1) fail(Errc::invalid_argument, "backward needs a scalar loss");
    loss->g[0] = T(1);
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> tape_;
  int op_count_ = 0;
};

namespace detail {
template <typename T>
void require(bool ok, const char* msg) {
  if (!ok) fail(Errc::invalid_argument, msg);
}
inline int reflect(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}
}  // namespace detail

// y = w[Co x Ci] . x[Ci x HW] + b, a pointwise convolution as one GEMM.
template <typename T>
TensorPtr<T> conv1x1(Graph<T>& g, TensorPtr<T> x, TensorPtr<T> w, TensorPtr<T> b) {
  detail::require<T>(x->shape.size() == 3, "conv1x1: input must be (C,H,W)");
  detail::require<T>(w->shape.size() == 2 && w->dim(1) == x->dim(0),
                     "conv1x1: weight shape mismatch");
  detail::require<T>(b->shape.size() == 1 && b->dim(0) == w->dim(0),
                     "conv1x1: bias shape mismatch");
  const int co = w->dim(0), ci = x->dim(0), n = x->dim(1) * x->dim(2);
  auto y = g.node({co, x->dim(1), x->dim(2)});
  gemm(false, false, co, n, ci, T(1), w->v.data(), ci, x->v.data(), n, T(0), y->v.data(), n);
  for (int o = 0; o < co; ++o) {
    T* row = y->v.data() + static_cast<std::size_t>(o) * n;
    for (int i = 0; i < n; ++i) row[i] += b->v[static_cast<std::size_t>(o)];
  }
  g.after_op("conv1x1", y);
  g.tape([x, w, b, y, co, ci, n] {
    gemm(true, false, ci, n, co, T(1), w->v.data(), ci, y->g.data(), n, T(1), x->g.data(), n);
    gemm(false, true, co, ci, n, T(1), y->g.data(), n, x->v.data(), n, T(1), w->g.data(), ci);
    for (int o = 0; o < co; ++o) {
      const T* row = y->g.data() + static_cast<std::size_t>(o) * n;
      T s = 0;
      for (int i = 0; i < n; ++i) s += row[i];
      b->g[static_cast<std::size_t>(o)] += s;
    }
  });
  return y;
}

// 3x3 convolution, reflect padding of 1, stride 1 or 2, output ceil(H/s).
// Lowered to a GEMM over an im2col buffer that backward reuses.
template <typename T>
TensorPtr<T> conv3x3(Graph<T>& g, TensorPtr<T> x, TensorPtr<T> w, TensorPtr<T> b,
                     int stride = 1) {
  detail::require<T>(x->shape.size() == 3, "conv3x3: input must be (C,H,W)");
  detail::require<T>(w->shape.size() == 4 && w->dim(1) == x->dim(0) && w->dim(2) == 3 &&
                         w->dim(3) == 3,
                     "conv3x3: weight shape mismatch");
  detail::require<T>(b->shape.size() == 1 && b->dim(0) == w->dim(0),
                     "conv3x3: bias shape mismatch");
  detail::require<T>(stride == 1 || stride == 2, "conv3x3: stride must be 1 or 2");
  detail::require<T>(x->dim(1) >= 2 && x->dim(2) >= 2, "conv3x3: input too small to pad");
  const int ci = x->dim(0), h = x->dim(1), wd = x->dim(2);
  const int ho = (h + stride - 1) / stride, wo = (wd + stride - 1) / stride;
  const int co = w->dim(0), k = ci * 9, n = ho * wo;

  auto cols = std::make_shared<Scratch<T>>(static_cast<std::size_t>(k) * n);
  for (int c = 0; c < ci; ++c) {
    const T* plane = x->v.data() + static_cast<std::size_t>(c) * h * wd;
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = cols->data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * n;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = detail::reflect(oy * stride - 1 + ky, h);
          for (int ox = 0; ox < wo; ++ox)
            dst[oy * wo + ox] = plane[iy * wd + detail::reflect(ox * stride - 1 + kx, wd)];
        }
      }
  }
  auto y = g.node({co, ho, wo});
  gemm(false, false, co, n, k, T(1), w->v.data(), k, cols->data(), n, T(0), y->v.data(), n);
  for (int o = 0; o < co; ++o) {
    T* row = y->v.data() + static_cast<std::size_t>(o) * n;
    for (int i = 0; i < n; ++i) row[i] += b->v[static_cast<std::size_t>(o)];
  }
  g.after_op("conv3x3", y);
  g.tape([x, w, b, y, cols, stride, ci, h, wd, ho, wo, co, k, n] {
    gemm(false, true, co, k, n, T(1), y->g.data(), n, cols->data(), n, T(1), w->g.data(), k);
    for (int o = 0; o < co; ++o) {
      const T* row = y->g.data() + static_cast<std::size_t>(o) * n;
      T s = 0;
      for (int i = 0; i < n; ++i) s += row[i];
      b->g[static_cast<std::size_t>(o)] += s;
    }
    Scratch<T> dcols(static_cast<std::size_t>(k) * n);
    gemm(true, false, k, n, co, T(1), w->v.data(), k, y->g.data(), n, T(0), dcols.data(), n);
    for (int c = 0; c < ci; ++c) {
      T* gplane = x->g.data() + static_cast<std::size_t>(c) * h * wd;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const T* src = dcols.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * n;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = detail::reflect(oy * stride - 1 + ky, h);
            for (int ox = 0; ox < wo; ++ox)
              gplane[iy * wd + detail::reflect(ox * stride - 1 + kx, wd)] += src[oy * wo + ox];
          }
        }
    }
  });
  return y;
}

// Leaky ReLU; slope 0 gives the plain ReLU. The gradient at 0 takes the
// leaky branch, consistent with sign conventions in the finite-diff checker.
template <typename T>
TensorPtr<T> leaky_relu(Graph<T>& g, TensorPtr<T> x, T slope) {
  auto y = g.node(x->shape);
  for (std::size_t i = 0; i < x->v.size(); ++i) {
    const T v = x->v[i];
    y->v[i] = v > T(0) ? v : slope * v;
  }
  if constexpr (std::is_same_v<T, double>) {
    T m = std::numeric_limits<T>::infinity();
    for (std::size_t i = 0; i < x->v.size(); ++i) m = std::min(m, std::abs(x->v[i]));
    g.note_kink(m);
  }
  g.after_op("leaky_relu", y);
  g.tape([x, y, slope] {
    for (std::size_t i = 0; i < x->v.size(); ++i)
      x->g[i] += y->g[i] * (x->v[i] > T(0) ? T(1) : slope);
  });
  return y;
}

template <typename T>
TensorPtr<T> relu(Graph<T>& g, TensorPtr<T> x) {
  return leaky_relu(g, std::move(x), T(0));
}

// 2x2 mean pooling with ceil semantics: edge windows average the cells that
// actually exist, so no padding value leaks into the statistics.
template <typename T>
TensorPtr<T> avg_pool2(Graph<T>& g, TensorPtr<T> x) {
  detail::require<T>(x->shape.size() == 3, "avg_pool2: input must be (C,H,W)");
  const int c = x->dim(0), h = x->dim(1), wd = x->dim(2);
  const int ho = (h + 1) / 2, wo = (wd + 1) / 2;
  auto y = g.node({c, ho, wo});
  // Even dims mean every window is full; that path needs no per-cell bounds
  // checks. Both paths visit window cells in the same order.
  const bool full = (h % 2 == 0) && (wd % 2 == 0);
  for (int ch = 0; ch < c; ++ch) {
    const T* in = x->v.data() + static_cast<std::size_t>(ch) * h * wd;
    T* out = y->v.data() + static_cast<std::size_t>(ch) * ho * wo;
    if (full) {
      for (int oy = 0; oy < ho; ++oy) {
        const T* r0 = in + static_cast<std::size_t>(oy) * 2 * wd;
        const T* r1 = r0 + wd;
        for (int ox = 0; ox < wo; ++ox)
          out[oy * wo + ox] =
              (r0[ox * 2] + r0[ox * 2 + 1] + r1[ox * 2] + r1[ox * 2 + 1]) / T(4);
      }
      continue;
    }
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox) {
        T s = 0;
        int cnt = 0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int iy = oy * 2 + dy, ix = ox * 2 + dx;
            if (iy < h && ix < wd) {
              s += in[iy * wd + ix];
              ++cnt;
            }
          }
        out[oy * wo + ox] = s / static_cast<T>(cnt);
      }
  }
  g.after_op("avg_pool2", y);
  g.tape([x, y, c, h, wd, ho, wo, full] {
    for (int ch = 0; ch < c; ++ch) {
      T* gin = x->g.data() + static_cast<std::size_t>(ch) * h * wd;
      const T* gout = y->g.data() + static_cast<std::size_t>(ch) * ho * wo;
      if (full) {
        for (int oy = 0; oy < ho; ++oy) {
          T* r0 = gin + static_cast<std::size_t>(oy) * 2 * wd;
          T* r1 = r0 + wd;
          for (int ox = 0; ox < wo; ++ox) {
            const T gshare = gout[oy * wo + ox] / T(4);
            r0[ox * 2] += gshare;
            r0[ox * 2 + 1] += gshare;
            r1[ox * 2] += gshare;
            r1[ox * 2 + 1] += gshare;
          }
        }
        continue;
      }
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          int cnt = 0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
              if (oy * 2 + dy < h && ox * 2 + dx < wd) ++cnt;
          const T gshare = gout[oy * wo + ox] / static_cast<T>(cnt);
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int iy = oy * 2 + dy, ix = ox * 2 + dx;
              if (iy < h && ix < wd) gin[iy * wd + ix] += gshare;
            }
        }
    }
  });
  return y;
}

template <typename T>
TensorPtr<T> global_avg_pool(Graph<T>& g, TensorPtr<T> x) {
  detail::require<T>(x->shape.size() == 3, "global_avg_pool: input must be (C,H,W)");
  const int c = x->dim(0);
  const std::size_t n = static_cast<std::size_t>(x->dim(1)) * x->dim(2);
  auto y = g.node({c});
  for (int ch = 0; ch < c; ++ch) {
    const T* in = x->v.data() + static_cast<std::size_t>(ch) * n;
    T s = 0;
    for (std::size_t i = 0; i < n; ++i) s += in[i];
    y->v[static_cast<std::size_t>(ch)] = s / static_cast<T>(n);
  }
  g.after_op("global_avg_pool", y);
  g.tape([x, y, c, n] {
    for (int ch = 0; ch < c; ++ch) {
      const T gshare = y->g[static_cast<std::size_t>(ch)] / static_cast<T>(n);
      T* gin = x->g.data() + static_cast<std::size_t>(ch) * n;
      for (std::size_t i = 0; i < n; ++i) gin[i] += gshare;
    }
  });
  return y;
}

// Per-channel standardization over the spatial plane, no learned affine.
// Uses the biased variance. eps keeps the rsqrt finite on flat channels.
template <typename T>
TensorPtr<T> instance_norm(Graph<T>& g, TensorPtr<T> x, T eps) {
  detail::require<T>(x->shape.size() == 3, "instance_norm: input must be (C,H,W)");
  const int c = x->dim(0);
  const std::size_t n = static_cast<std::size_t>(x->dim(1)) * x->dim(2);
  auto y = g.node(x->shape);
  auto inv = std::make_shared<std::vector<T>>(static_cast<std::size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    const T* in = x->v.data() + static_cast<std::size_t>(ch) * n;
    T* out = y->v.data() + static_cast<std::size_t>(ch) * n;
    T mu = 0;
    for (std::size_t i = 0; i < n; ++i) mu += in[i];
    mu /= static_cast<T>(n);
    T var = 0;
    for (std::size_t i = 0; i < n; ++i) var += (in[i] - mu) * (in[i] - mu);
    var /= static_cast<T>(n);
    const T iv = T(1) / std::sqrt(var + eps);
    (*inv)[static_cast<std::size_t>(ch)] = iv;
    for (std::size_t i = 0; i < n; ++i) out[i] = (in[i] - mu) * iv;
  }
  g.after_op("instance_norm", y);
  g.tape([x, y, inv, c, n] {
    for (int ch = 0; ch < c; ++ch) {
      const T* xhat = y->v.data() + static_cast<std::size_t>(ch) * n;
      const T* gy = y->g.data() + static_cast<std::size_t>(ch) * n;
      T* gx = x->g.data() + static_cast<std::size_t>(ch) * n;
      T sum_gy = 0, sum_gy_xhat = 0;
      for (std::size_t i = 0; i < n; ++i) {
        sum_gy += gy[i];
        sum_gy_xhat += gy[i] * xhat[i];
      }
      const T iv = (*inv)[static_cast<std::size_t>(ch)];
      const T invn = T(1) / static_cast<T>(n);
      for (std::size_t i = 0; i < n; ++i)
        gx[i] += iv * (gy[i] - invn * sum_gy - xhat[i] * invn * sum_gy_xhat);
    }
  });
  return y;
}

// Inverted dropout. The mask comes from the counter RNG keyed by
// (seed, stream, key, element), so a fixed key reproduces the exact mask:
// training steps stay bitwise replayable and the grad checker can hold the
// mask constant while probing. Inactive (identity) when g.train is false.
template <typename T>
TensorPtr<T> dropout(Graph<T>& g, TensorPtr<T> x, double p, std::uint64_t seed,
                     std::uint64_t key) {
  detail::require<T>(p >= 0.0 && p < 1.0, "dropout: p must be in [0,1)");
  if (!g.train || p == 0.0) return x;
  auto y = g.node(x->shape);
  const T scale = T(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < x->v.size(); ++i) {
    const bool keep = rng::uniform(seed, rng::Stream::dropout, key, i) >= p;
    y->v[i] = keep ? x->v[i] * scale : T(0);
  }
  g.after_op("dropout", y);
  g.tape([x, y, p, seed, key, scale] {
    for (std::size_t i = 0; i < x->v.size(); ++i) {
      const bool keep = rng::uniform(seed, rng::Stream::dropout, key, i) >= p;
      if (keep) x->g[i] += y->g[i] * scale;
    }
  });
  return y;
}

// (C*r^2, H, W) -> (C, H*r, W*r); channel c*r^2 + dy*r + dx lands on the
// (dy,dx) sub-pixel. Pure permutation, so backward is the inverse gather.
template <typename T>
TensorPtr<T> pixel_shuffle(Graph<T>& g, TensorPtr<T> x, int r) {
  detail::require<T>(x->shape.size() == 3 && r >= 2 && x->dim(0) % (r * r) == 0,
                     "pixel_shuffle: channels must be divisible by r^2");
  const int c = x->dim(0) / (r * r), h = x->dim(1), wd = x->dim(2);
  auto y = g.node({c, h * r, wd * r});
  // By value: the tape closure outlives this frame.
  auto at_in = [r, h, wd](int cc, int dy, int dx, int iy, int ix) -> std::size_t {
    return ((static_cast<std::size_t>(cc) * r * r + static_cast<std::size_t>(dy) * r + dx) * h +
            iy) *
               wd +
           ix;
  };
  for (int cc = 0; cc < c; ++cc)
    for (int iy = 0; iy < h; ++iy)
      for (int dy = 0; dy < r; ++dy)
        for (int ix = 0; ix < wd; ++ix)
          for (int dx = 0; dx < r; ++dx)
            y->v[(static_cast<std::size_t>(cc) * h * r + iy * r + dy) * (wd * r) + ix * r + dx] =
                x->v[at_in(cc, dy, dx, iy, ix)];
  g.after_op("pixel_shuffle", y);
  g.tape([x, y, r, c, h, wd, at_in] {
    for (int cc = 0; cc < c; ++cc)
      for (int iy = 0; iy < h; ++iy)
        for (int dy = 0; dy < r; ++dy)
          for (int ix = 0; ix < wd; ++ix)
            for (int dx = 0; dx < r; ++dx)
              x->g[at_in(cc, dy, dx, iy, ix)] +=
                  y->g[(static_cast<std::size_t>(cc) * h * r + iy * r + dy) * (wd * r) + ix * r +
                       dx];
  });
  return y;
}

// Per-channel affine from vectors: y[c,:,:] = a[c]*x[c,:,:] + b[c].
template <typename T>
TensorPtr<T> channel_affine(Graph<T>& g, TensorPtr<T> x, TensorPtr<T> a, TensorPtr<T> b) {
  detail::require<T>(x->shape.size() == 3, "channel_affine: input must be (C,H,W)");
  detail::require<T>(a->shape.size() == 1 && a->dim(0) == x->dim(0) && same_shape(*a, *b),
                     "channel_affine: scale/shift must be (C)");
  const int c = x->dim(0);
  const std::size_t n = static_cast<std::size_t>(x->dim(1)) * x->dim(2);
  auto y = g.node(x->shape);
  for (int ch = 0; ch < c; ++ch) {
    const T* in = x->v.data() + static_cast<std::size_t>(ch) * n;
    T* out = y->v.data() + static_cast<std::size_t>(ch) * n;
    const T av = a->v[static_cast<std::size_t>(ch)], bv = b->v[static_cast<std::size_t>(ch)];
    for (std::size_t i = 0; i < n; ++i) out[i] = av * in[i] + bv;
  }
  g.after_op("channel_affine", y);
  g.tape([x, a, b, y, c, n] {
    for (int ch = 0; ch < c; ++ch) {
      const T* in = x->v.data() + static_cast<std::size_t>(ch) * n;
      const T* gy = y->g.data() + static_cast<std::size_t>(ch) * n;
      T* gx = x->g.data() + static_cast<std::size_t>(ch) * n;
      const T av = a->v[static_cast<std::size_t>(ch)];
      T ga = 0, gb = 0;
      for (std::size_t i = 0; i < n; ++i) {
        gx[i] += av * gy[i];
        ga += gy[i] * in[i];
        gb += gy[i];
      }
      a->g[static_cast<std::size_t>(ch)] += ga;
      b->g[static_cast<std::size_t>(ch)] += gb;
    }
  });
  return y;
}

// channel_affine followed by a leaky ReLU, in one pass and one output
// tensor. Middle layers of the color mapper run this pair on full-size
// feature maps, where the separate ops would spend most of their time
// streaming the intermediate through memory. slope must be >= 0 so the
// branch taken can be recovered from the sign of the output.
template <typename T>
TensorPtr<T> affine_relu(Graph<T>& g, TensorPtr<T> x, TensorPtr<T> a, TensorPtr<T> b, T slope) {
  detail::require<T>(x->shape.size() == 3, "affine_relu: input must be (C,H,W)");
  detail::require<T>(a->shape.size() == 1 && a->dim(0) == x->dim(0) && same_shape(*a, *b),
                     "affine_relu: scale/shift must be (C)");
  detail::require<T>(slope >= T(0), "affine_relu: slope must be non-negative");
  const int c = x->dim(0);
  const std::size_t n = static_cast<std::size_t>(x->dim(1)) * x->dim(2);
  auto y = g.node(x->shape);
  for (int ch = 0; ch < c; ++ch) {
    const T* in = x->v.data() + static_cast<std::size_t>(ch) * n;
    T* out = y->v.data() + static_cast<std::size_t>(ch) * n;
    const T av = a->v[static_cast<std::size_t>(ch)], bv = b->v[static_cast<std::size_t>(ch)];
    for (std::size_t i = 0; i < n; ++i) {
      const T t = av * in[i] + bv;
      out[i] = t > T(0) ? t : slope * t;
    }
  }
  if constexpr (std::is_same_v<T, double>) {
    T m = std::numeric_limits<T>::infinity();
    for (int ch = 0; ch < c; ++ch) {
      const T* in = x->v.data() + static_cast<std::size_t>(ch) * n;
      const T av = a->v[static_cast<std::size_t>(ch)], bv = b->v[static_cast<std::size_t>(ch)];
      for (std::size_t i = 0; i < n; ++i) m = std::min(m, std::abs(av * in[i] + bv));
    }
    g.note_kink(m);
  }
  g.after_op("affine_relu", y);
  g.tape([x, a, b, y, slope, c, n] {
    for (int ch = 0; ch < c; ++ch) {
      const T* in = x->v.data() + static_cast<std::size_t>(ch) * n;
      const T* yv = y->v.data() + static_cast<std::size_t>(ch) * n;
      const T* gy = y->g.data() + static_cast<std::size_t>(ch) * n;
      T* gx = x->g.data() + static_cast<std::size_t>(ch) * n;
      const T av = a->v[static_cast<std::size_t>(ch)];
      T ga = 0, gb = 0;
      for (std::size_t i = 0; i < n; ++i) {
        // yv > 0 iff the pre-activation was > 0, since slope >= 0.
        const T gm = yv[i] > T(0) ? gy[i] : slope * gy[i];
        gx[i] += av * gm;
        ga += gm * in[i];
        gb += gm;
      }
      a->g[static_cast<std::size_t>(ch)] += ga;
      b->g[static_cast<std::size_t>(ch)] += gb;
    }
  });
  return y;
}

// Spatial feature modulation: y = m (.) x + n with full (C,H,W) maps.
template <typename T>
TensorPtr<T> spatial_modulate(Graph<T>& g, TensorPtr<T> x, TensorPtr<T> m, TensorPtr<T> n) {
  detail::require<T>(same_shape(*x, *m) && same_shape(*x, *n),
                     "spatial_modulate: operand shapes must match");
  auto y = g.node(x->shape);
  for (std::size_t i = 0; i < x->v.size(); ++i) y->v[i] = m->v[i] * x->v[i] + n->v[i];
  g.after_op("spatial_modulate", y);
  g.tape([x, m, n, y] {
    for (std::size_t i = 0; i < x->v.size(); ++i) {
      x->g[i] += m->v[i] * y->g[i];
      m->g[i] += x->v[i] * y->g[i];
      n->g[i] += y->g[i];
    }
  });
  return y;
}

// y = w[O x K] . v + b for flat vectors.
template <typename T>
TensorPtr<T> linear(Graph<T>& g, TensorPtr<T> x, TensorPtr<T> w, TensorPtr<T> b) {
  detail::require<T>(x->shape.size() == 1, "linear: input must be a vector");
  detail::require<T>(w->shape.size() == 2 && w->dim(1) == x->dim(0),
                     "linear: weight shape mismatch");
  detail::require<T>(b->shape.size() == 1 && b->dim(0) == w->dim(0),
                     "linear: bias shape mismatch");
  const int o = w->dim(0), k = x->dim(0);
  auto y = g.node({o});
  gemm(false, false, o, 1, k, T(1), w->v.data(), k, x->v.data(), 1, T(0), y->v.data(), 1);
  for (int i = 0; i < o; ++i) y->v[static_cast<std::size_t>(i)] += b->v[static_cast<std::size_t>(i)];
  g.after_op("linear", y);
  g.tape([x, w, b, y, o, k] {
    gemm(true, false, k, 1, o, T(1), w->v.data(), k, y->g.data(), 1, T(1), x->g.data(), 1);
    gemm(false, true, o, k, 1, T(1), y->g.data(), 1, x->v.data(), 1, T(1), w->g.data(), k);
    for (int i = 0; i < o; ++i) b->g[static_cast<std::size_t>(i)] += y->g[static_cast<std::size_t>(i)];
  });
  return y;
}

template <typename T>
TensorPtr<T> slice_vec(Graph<T>& g, TensorPtr<T> x, int offset, int len) {
  detail::require<T>(x->shape.size() == 1, "slice_vec: input must be a vector");
  detail::require<T>(offset >= 0 && len > 0 && offset + len <= x->dim(0),
                     "slice_vec: range out of bounds");
  auto y = g.node({len});
  std::copy_n(x->v.begin() + offset, len, y->v.begin());
  g.after_op("slice_vec", y);
  g.tape([x, y, offset, len] {
    for (int i = 0; i < len; ++i) x->g[static_cast<std::size_t>(offset + i)] += y->g[static_cast<std::size_t>(i)];
  });
  return y;
}

template <typename T>
TensorPtr<T> concat_channels(Graph<T>& g, TensorPtr<T> a, TensorPtr<T> b) {
  detail::require<T>(a->shape.size() == 3 && b->shape.size() == 3 && a->dim(1) == b->dim(1) &&
                         a->dim(2) == b->dim(2),
                     "concat_channels: spatial dims must match");
  auto y = g.node({a->dim(0) + b->dim(0), a->dim(1), a->dim(2)});
  std::copy(a->v.begin(), a->v.end(), y->v.begin());
  std::copy(b->v.begin(), b->v.end(), y->v.begin() + static_cast<std::ptrdiff_t>(a->v.size()));
  g.after_op("concat_channels", y);
  g.tape([a, b, y] {
    for (std::size_t i = 0; i < a->g.size(); ++i) a->g[i] += y->g[i];
    for (std::size_t i = 0; i < b->g.size(); ++i) b->g[i] += y->g[a->g.size() + i];
  });
  return y;
}

// Contiguous channel-range view of a (C,H,W) map, as a copy.
template <typename T>
TensorPtr<T> slice_channels(Graph<T>& g, TensorPtr<T> x, int offset, int len) {
  detail::require<T>(x->shape.size() == 3, "slice_channels: input must be (C,H,W)");
  detail::require<T>(offset >= 0 && len > 0 && offset + len <= x->dim(0),
                     "slice_channels: range out of bounds");
  const std::size_t plane = static_cast<std::size_t>(x->dim(1)) * x->dim(2);
  auto y = g.node({len, x->dim(1), x->dim(2)});
  std::copy_n(x->v.begin() + static_cast<std::ptrdiff_t>(offset * plane), len * plane,
              y->v.begin());
  g.after_op("slice_channels", y);
  g.tape([x, y, offset, plane] {
    for (std::size_t i = 0; i < y->g.size(); ++i)
      x->g[static_cast<std::size_t>(offset) * plane + i] += y->g[i];
  });
  return y;
}

template <typename T>
TensorPtr<T> add(Graph<T>& g, TensorPtr<T> a, TensorPtr<T> b) {
  detail::require<T>(same_shape(*a, *b), "add: shapes must match");
  auto y = g.node(a->shape);
  for (std::size_t i = 0; i < a->v.size(); ++i) y->v[i] = a->v[i] + b->v[i];
  g.after_op("add", y);
  g.tape([a, b, y] {
    for (std::size_t i = 0; i < a->g.size(); ++i) {
      a->g[i] += y->g[i];
      b->g[i] += y->g[i];
    }
  });
  return y;
}

template <typename T>
TensorPtr<T> scale_by(Graph<T>& g, TensorPtr<T> x, T k) {
  auto y = g.node(x->shape);
  for (std::size_t i = 0; i < x->v.size(); ++i) y->v[i] = k * x->v[i];
  g.after_op("scale_by", y);
  g.tape([x, y, k] {
    for (std::size_t i = 0; i < x->g.size(); ++i) x->g[i] += k * y->g[i];
  });
  return y;
}

// Mean absolute error against a constant target (no gradient to the target).
template <typename T>
TensorPtr<T> l1_loss(Graph<T>& g, TensorPtr<T> pred, const std::vector<T>& target) {
  detail::require<T>(pred->numel() == target.size(), "l1_loss: size mismatch");
  auto y = g.node({1});
  const std::size_t n = pred->numel();
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += std::abs(pred->v[i] - target[i]);
  if constexpr (std::is_same_v<T, double>) {
    T m = std::numeric_limits<T>::infinity();
    for (std::size_t i = 0; i < n; ++i) m = std::min(m, std::abs(pred->v[i] - target[i]));
    g.note_kink(m);
  }
  y->v[0] = s / static_cast<T>(n);
  g.after_op("l1_loss", y);
  auto tgt = std::make_shared<std::vector<T>>(target);
  g.tape([pred, y, tgt, n] {
    const T gshare = y->g[0] / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const T d = pred->v[i] - (*tgt)[i];
      if (d > T(0))
        pred->g[i] += gshare;
      else if (d < T(0))
        pred->g[i] -= gshare;
    }
  });
  return y;
}

}  // namespace hdrtv::nn
