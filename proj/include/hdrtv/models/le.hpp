#pragma once
#include <string>
#include <utility>

#include "hdrtv/nn/graph.hpp"
#include "hdrtv/nn/init.hpp"

namespace hdrtv {

// Local enhancer. A three-level U-shaped network whose residual blocks are
// modulated per pixel by feature maps distilled from the input itself, so
// the correction it learns can vary across the frame: highlight roll-off,
// local contrast, banding repair. The tail convolution starts at zero and
// the input is added back globally, which makes a freshly built model the
// exact identity: training only ever learns a correction on top of that.
template <typename T>
struct Le {
  int width = 20;
  double lrelu_slope = 0.1;

  struct Block {
    nn::TensorPtr<T> w1, b1, w2, b2;
  };

  nn::TensorPtr<T> head_w, head_b;  // 3 -> w
  std::vector<Block> enc1, enc2, mid, dec2, dec1;
  nn::TensorPtr<T> down1_w, down1_b;  // w -> 2w, stride 2
  nn::TensorPtr<T> down2_w, down2_b;  // 2w -> 4w, stride 2
  nn::TensorPtr<T> up2_w, up2_b;      // 1x1 4w -> 8w, shuffled to 2w
  nn::TensorPtr<T> fuse2_w, fuse2_b;  // 1x1 4w -> 2w after the skip concat
  nn::TensorPtr<T> up1_w, up1_b;      // 1x1 2w -> 4w, shuffled to w
  nn::TensorPtr<T> fuse1_w, fuse1_b;  // 1x1 2w -> w
  nn::TensorPtr<T> tail_w, tail_b;    // w -> 3, zero at init

  std::vector<nn::TensorPtr<T>> cs_w, cs_b;  // shared stem: 3->w, w->w, w->w
  nn::TensorPtr<T> cl1_w, cl1_b;             // w -> 2w           (full res maps)
  nn::TensorPtr<T> cl2_w, cl2_b;             // w -> 4w, stride 2 (half res maps)
  nn::TensorPtr<T> cl3a_w, cl3a_b;           // w -> w,  stride 2
  nn::TensorPtr<T> cl3b_w, cl3b_b;           // w -> 8w, stride 2 (quarter res maps)

  static Le make(std::uint64_t seed, int width = 20) {
    if (width < 4) fail(Errc::invalid_argument, "width must be at least 4");
    Le m;
    m.width = width;
    const int w = width;
    std::uint64_t pidx = 1000;  // separate key space from other model kinds
    auto conv3 = [&](int co, int ci) {
      auto wt = nn::make_tensor<T>({co, ci, 3, 3});
      nn::he_uniform(*wt, ci * 9, seed, pidx++);
      return wt;
    };
    auto conv1 = [&](int co, int ci) {
      auto wt = nn::make_tensor<T>({co, ci});
      nn::he_uniform(*wt, ci, seed, pidx++);
      return wt;
    };
    auto bias = [&](int co) { return nn::make_tensor<T>({co}); };
    auto block = [&](int c) { return Block{conv3(c, c), bias(c), conv3(c, c), bias(c)}; };

    m.head_w = conv3(w, 3);
    m.head_b = bias(w);
    m.enc1 = {block(w)};
    m.down1_w = conv3(2 * w, w);
    m.down1_b = bias(2 * w);
    m.enc2 = {block(2 * w), block(2 * w)};
    m.down2_w = conv3(4 * w, 2 * w);
    m.down2_b = bias(4 * w);
    m.mid = {block(4 * w), block(4 * w), block(4 * w)};
    m.up2_w = conv1(8 * w, 4 * w);
    m.up2_b = bias(8 * w);
    m.fuse2_w = conv1(2 * w, 4 * w);
    m.fuse2_b = bias(2 * w);
    m.dec2 = {block(2 * w), block(2 * w)};
    m.up1_w = conv1(4 * w, 2 * w);
    m.up1_b = bias(4 * w);
    m.fuse1_w = conv1(w, 2 * w);
    m.fuse1_b = bias(w);
    m.dec1 = {block(w)};
    m.tail_w = nn::make_tensor<T>({3, w, 3, 3});  // all zero: identity at init
    m.tail_b = bias(3);

    m.cs_w = {conv3(w, 3), conv3(w, w), conv3(w, w)};
    m.cs_b = {bias(w), bias(w), bias(w)};
    m.cl1_w = conv3(2 * w, w);
    m.cl1_b = bias(2 * w);
    m.cl2_w = conv3(4 * w, w);
    m.cl2_b = bias(4 * w);
    m.cl3a_w = conv3(w, w);
    m.cl3a_b = bias(w);
    m.cl3b_w = conv3(8 * w, w);
    m.cl3b_b = bias(8 * w);
    return m;
  }

  std::vector<std::pair<std::string, nn::TensorPtr<T>>> named() const {
    std::vector<std::pair<std::string, nn::TensorPtr<T>>> out;
    auto put = [&](const std::string& n, const nn::TensorPtr<T>& t) { out.emplace_back(n, t); };
    auto put_blocks = [&](const std::string& n, const std::vector<Block>& bs) {
      for (std::size_t i = 0; i < bs.size(); ++i) {
        const std::string p = n + "." + std::to_string(i);
        put(p + ".c1.w", bs[i].w1);
        put(p + ".c1.b", bs[i].b1);
        put(p + ".c2.w", bs[i].w2);
        put(p + ".c2.b", bs[i].b2);
      }
    };
    put("head.w", head_w);
    put("head.b", head_b);
    put_blocks("enc1", enc1);
    put("down1.w", down1_w);
    put("down1.b", down1_b);
    put_blocks("enc2", enc2);
    put("down2.w", down2_w);
    put("down2.b", down2_b);
    put_blocks("mid", mid);
    put("up2.w", up2_w);
    put("up2.b", up2_b);
    put("fuse2.w", fuse2_w);
    put("fuse2.b", fuse2_b);
    put_blocks("dec2", dec2);
    put("up1.w", up1_w);
    put("up1.b", up1_b);
    put("fuse1.w", fuse1_w);
    put("fuse1.b", fuse1_b);
    put_blocks("dec1", dec1);
    put("tail.w", tail_w);
    put("tail.b", tail_b);
    for (std::size_t i = 0; i < cs_w.size(); ++i) {
      put("cstem." + std::to_string(i) + ".w", cs_w[i]);
      put("cstem." + std::to_string(i) + ".b", cs_b[i]);
    }
    put("clvl1.w", cl1_w);
    put("clvl1.b", cl1_b);
    put("clvl2.w", cl2_w);
    put("clvl2.b", cl2_b);
    put("clvl3a.w", cl3a_w);
    put("clvl3a.b", cl3a_b);
    put("clvl3b.w", cl3b_w);
    put("clvl3b.b", cl3b_b);
    return out;
  }

  std::vector<nn::TensorPtr<T>> params() const {
    std::vector<nn::TensorPtr<T>> out;
    for (auto& [name, t] : named()) out.push_back(t);
    return out;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (auto& [name, t] : named()) n += t->numel();
    return n;
  }
};

namespace detail_le {
template <typename T>
nn::TensorPtr<T> run_blocks(nn::Graph<T>& g, const std::vector<typename Le<T>::Block>& bs,
                            nn::TensorPtr<T> x, nn::TensorPtr<T> mm, nn::TensorPtr<T> nn_,
                            T slope) {
  for (const auto& b : bs) {
    auto t = nn::conv3x3(g, x, b.w1, b.b1);
    t = nn::spatial_modulate(g, t, mm, nn_);
    t = nn::leaky_relu(g, t, slope);
    t = nn::conv3x3(g, t, b.w2, b.b2);
    x = nn::add(g, x, t);
  }
  return x;
}
}  // namespace detail_le

// (3,H,W) -> (3,H,W); H and W must be multiples of 4 (two exact halvings
// must mirror two exact doublings for the skip concats to line up). Output
// is unclamped.
template <typename T>
nn::TensorPtr<T> le_forward(nn::Graph<T>& g, const Le<T>& m, nn::TensorPtr<T> x) {
  if (x->shape.size() != 3 || x->dim(0) != 3)
    fail(Errc::invalid_argument, "input must be (3,H,W)");
  if (x->dim(1) % 4 != 0 || x->dim(2) % 4 != 0 || x->dim(1) < 8 || x->dim(2) < 8)
    fail(Errc::invalid_argument, "height and width must be multiples of 4, at least 8");
  const T sl = static_cast<T>(m.lrelu_slope);
  const int w = m.width;

  auto c = x;
  for (std::size_t i = 0; i < m.cs_w.size(); ++i)
    c = nn::leaky_relu(g, nn::conv3x3(g, c, m.cs_w[i], m.cs_b[i]), sl);
  auto l1 = nn::conv3x3(g, c, m.cl1_w, m.cl1_b);
  auto m1 = nn::slice_channels(g, l1, 0, w);
  auto n1 = nn::slice_channels(g, l1, w, w);
  auto l2 = nn::conv3x3(g, c, m.cl2_w, m.cl2_b, 2);
  auto m2 = nn::slice_channels(g, l2, 0, 2 * w);
  auto n2 = nn::slice_channels(g, l2, 2 * w, 2 * w);
  auto t3 = nn::leaky_relu(g, nn::conv3x3(g, c, m.cl3a_w, m.cl3a_b, 2), sl);
  auto l3 = nn::conv3x3(g, t3, m.cl3b_w, m.cl3b_b, 2);
  auto m3 = nn::slice_channels(g, l3, 0, 4 * w);
  auto n3 = nn::slice_channels(g, l3, 4 * w, 4 * w);

  auto h0 = nn::conv3x3(g, x, m.head_w, m.head_b);
  auto e1 = detail_le::run_blocks(g, m.enc1, h0, m1, n1, sl);
  auto d1 = nn::conv3x3(g, e1, m.down1_w, m.down1_b, 2);
  auto e2 = detail_le::run_blocks(g, m.enc2, d1, m2, n2, sl);
  auto d2 = nn::conv3x3(g, e2, m.down2_w, m.down2_b, 2);
  auto mm = detail_le::run_blocks(g, m.mid, d2, m3, n3, sl);
  auto u2 = nn::pixel_shuffle(g, nn::conv1x1(g, mm, m.up2_w, m.up2_b), 2);
  auto f2 = nn::conv1x1(g, nn::concat_channels(g, u2, e2), m.fuse2_w, m.fuse2_b);
  auto o2 = detail_le::run_blocks(g, m.dec2, f2, m2, n2, sl);
  auto u1 = nn::pixel_shuffle(g, nn::conv1x1(g, o2, m.up1_w, m.up1_b), 2);
  auto f1 = nn::conv1x1(g, nn::concat_channels(g, u1, e1), m.fuse1_w, m.fuse1_b);
  auto o1 = detail_le::run_blocks(g, m.dec1, f1, m1, n1, sl);
  auto res = nn::conv3x3(g, o1, m.tail_w, m.tail_b);
  return nn::add(g, x, res);
}

}  // namespace hdrtv
