#pragma once
#include <string>
#include <utility>

#include "hdrtv/nn/graph.hpp"
#include "hdrtv/nn/init.hpp"

namespace hdrtv {

// Per-run knobs that are not part of the model: dropout needs to know
// whether we are training and which mask to draw.
struct RunCtx {
  bool train = false;
  std::uint64_t seed = 0;
  std::uint64_t dropout_key = 0;
};

// Global color mapper. The base path is three pointwise convolutions, so
// every pixel undergoes the same color transform; the condition path
// summarizes a downsampled copy of the frame into one vector that modulates
// each base layer with a per-channel scale and shift. Color decisions are
// global by construction; nothing here can sharpen or blur.
template <typename T>
struct Agcm {
  int base_width = 64;
  int cond_blocks = 4;
  int cond_width = 64;
  double lrelu_slope = 0.1;
  double dropout_p = 0.5;
  double in_eps = 1e-5;
  bool use_condition = true;

  std::vector<nn::TensorPtr<T>> base_w, base_b;  // 3 -> W -> W -> 3
  std::vector<nn::TensorPtr<T>> head_w, head_b;  // cond vector -> (scale, shift)
  std::vector<nn::TensorPtr<T>> cond_w, cond_b;  // condition blocks
  nn::TensorPtr<T> cond_out_w, cond_out_b;

  static Agcm make(std::uint64_t seed, bool with_condition = true) {
    Agcm m;
    m.use_condition = with_condition;
    const int w = m.base_width, k = m.cond_width;
    const int base_dims[4] = {3, w, w, 3};
    std::uint64_t pidx = 0;
    for (int i = 0; i < 3; ++i) {
      auto wt = nn::make_tensor<T>({base_dims[i + 1], base_dims[i]});
      auto bt = nn::make_tensor<T>({base_dims[i + 1]});
      nn::he_uniform(*wt, base_dims[i], seed, pidx++);
      m.base_w.push_back(wt);
      m.base_b.push_back(bt);
    }
    if (with_condition) {
      for (int i = 0; i < 3; ++i) {
        // Zero weights plus a (1...,0...) bias make every head emit scale 1,
        // shift 0 at init, so the condition path starts as a strict no-op.
        auto hw = nn::make_tensor<T>({2 * base_dims[i + 1], k});
        auto hb = nn::make_tensor<T>({2 * base_dims[i + 1]});
        for (int c = 0; c < base_dims[i + 1]; ++c) hb->v[static_cast<std::size_t>(c)] = T(1);
        m.head_w.push_back(hw);
        m.head_b.push_back(hb);
      }
      for (int i = 0; i < m.cond_blocks; ++i) {
        const int ci = i == 0 ? 3 : k;
        auto wt = nn::make_tensor<T>({k, ci});
        auto bt = nn::make_tensor<T>({k});
        nn::he_uniform(*wt, ci, seed, pidx++);
        m.cond_w.push_back(wt);
        m.cond_b.push_back(bt);
      }
      m.cond_out_w = nn::make_tensor<T>({k, k});
      m.cond_out_b = nn::make_tensor<T>({k});
      nn::he_uniform(*m.cond_out_w, k, seed, pidx++);
    }
    return m;
  }

  std::vector<nn::TensorPtr<T>> params() const {
    std::vector<nn::TensorPtr<T>> out;
    for (auto& [name, t] : named()) out.push_back(t);
    return out;
  }

  std::vector<std::pair<std::string, nn::TensorPtr<T>>> named() const {
    std::vector<std::pair<std::string, nn::TensorPtr<T>>> out;
    for (std::size_t i = 0; i < base_w.size(); ++i) {
      out.emplace_back("base." + std::to_string(i) + ".w", base_w[i]);
      out.emplace_back("base." + std::to_string(i) + ".b", base_b[i]);
    }
    for (std::size_t i = 0; i < head_w.size(); ++i) {
      out.emplace_back("head." + std::to_string(i) + ".w", head_w[i]);
      out.emplace_back("head." + std::to_string(i) + ".b", head_b[i]);
    }
    for (std::size_t i = 0; i < cond_w.size(); ++i) {
      out.emplace_back("cond." + std::to_string(i) + ".w", cond_w[i]);
      out.emplace_back("cond." + std::to_string(i) + ".b", cond_b[i]);
    }
    if (cond_out_w) {
      out.emplace_back("cond.out.w", cond_out_w);
      out.emplace_back("cond.out.b", cond_out_b);
    }
    return out;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (auto& [name, t] : named()) n += t->numel();
    return n;
  }
};

// Condition vector from a small copy of the frame (the caller typically
// box-downsamples the full image by 4). Each block halves the resolution;
// the tail is dropout, a pointwise conv and a global average.
//
// Block order is conv -> pool -> norm -> activation. The activation must
// come after the normalization: a normalized channel has zero spatial mean,
// and the tail (a linear map followed by a global average) reads nothing
// but that mean, so norm-last would collapse V to the tail bias for every
// input. Rectifying after the norm leaves a mean that encodes the shape of
// the channel's distribution, which is the statistic V is meant to carry.
template <typename T>
nn::TensorPtr<T> agcm_condition(nn::Graph<T>& g, const Agcm<T>& m, nn::TensorPtr<T> cond_in,
                                const RunCtx& ctx) {
  if (!m.use_condition) fail(Errc::invalid_argument, "model has no condition branch");
  auto t = std::move(cond_in);
  for (std::size_t i = 0; i < m.cond_w.size(); ++i) {
    t = nn::conv1x1(g, t, m.cond_w[i], m.cond_b[i]);
    t = nn::avg_pool2(g, t);
    t = nn::instance_norm(g, t, static_cast<T>(m.in_eps));
    t = nn::leaky_relu(g, t, static_cast<T>(m.lrelu_slope));
  }
  t = nn::dropout(g, t, m.dropout_p, ctx.seed, ctx.dropout_key);
  t = nn::conv1x1(g, t, m.cond_out_w, m.cond_out_b);
  return nn::global_avg_pool(g, t);
}

// Maps an encoded image tensor (3,H,W) through the base stack, modulated by
// cond_vec when the condition branch is enabled (pass the result of
// agcm_condition). Output is unclamped.
template <typename T>
nn::TensorPtr<T> agcm_forward(nn::Graph<T>& g, const Agcm<T>& m, nn::TensorPtr<T> x,
                              nn::TensorPtr<T> cond_vec = {}) {
  if (m.use_condition && !cond_vec)
    fail(Errc::invalid_argument, "condition vector required by this model");
  auto t = std::move(x);
  for (std::size_t i = 0; i < m.base_w.size(); ++i) {
    t = nn::conv1x1(g, t, m.base_w[i], m.base_b[i]);
    const bool rectify = i + 1 < m.base_w.size();
    if (m.use_condition) {
      const int c = m.base_w[i]->dim(0);
      auto av = nn::linear(g, cond_vec, m.head_w[i], m.head_b[i]);
      auto scale = nn::slice_vec(g, av, 0, c);
      auto shift = nn::slice_vec(g, av, c, c);
      // Fused on middle layers: these run on full-size maps, and a separate
      // affine would stream one extra intermediate through memory.
      t = rectify ? nn::affine_relu(g, t, scale, shift, T(0))
                  : nn::channel_affine(g, t, scale, shift);
    } else if (rectify) {
      t = nn::relu(g, t);
    }
  }
  return t;
}

}  // namespace hdrtv
