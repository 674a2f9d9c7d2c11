#pragma once
#include <algorithm>

#include "hdrtv/color_image.hpp"
#include "hdrtv/nn/tensor.hpp"

namespace hdrtv {

// Images and (3,H,W) tensors share the planar layout, so these are plain
// copies plus a precision cast. Value-level helpers, no autodiff involved.
template <typename T>
nn::TensorPtr<T> image_to_tensor(const ColorImage& img) {
  auto t = nn::make_tensor<T>({3, img.h, img.w});
  for (std::size_t i = 0; i < img.px.size(); ++i) t->v[i] = static_cast<T>(img.px[i]);
  return t;
}

template <typename T>
ColorImage tensor_to_image(const nn::Tensor<T>& t, ColorSpace space, Domain domain) {
  if (t.shape.size() != 3 || t.dim(0) != 3)
    fail(Errc::invalid_argument, "tensor_to_image needs a (3,H,W) tensor");
  ColorImage img(t.dim(2), t.dim(1), space, domain);
  for (std::size_t i = 0; i < img.px.size(); ++i) img.px[i] = static_cast<double>(t.v[i]);
  return img;
}

template <typename T>
void clamp01(nn::Tensor<T>& t) {
  for (auto& v : t.v) v = std::clamp(v, T(0), T(1));
}

// Reflect-pads right/bottom so both spatial dims become multiples of `mult`.
// Mirrors without repeating the edge row, the same convention the convs use.
template <typename T>
nn::TensorPtr<T> reflect_pad_to_multiple(const nn::Tensor<T>& t, int mult) {
  if (t.shape.size() != 3) fail(Errc::invalid_argument, "pad needs a (C,H,W) tensor");
  const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
  const int ph = (mult - h % mult) % mult, pw = (mult - w % mult) % mult;
  if (ph >= h || pw >= w) fail(Errc::invalid_argument, "image too small to pad for the model");
  auto out = nn::make_tensor<T>({c, h + ph, w + pw});
  auto refl = [](int i, int n) { return i < n ? i : 2 * n - 2 - i; };
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h + ph; ++y)
      for (int x = 0; x < w + pw; ++x)
        out->v[(static_cast<std::size_t>(ch) * (h + ph) + y) * (w + pw) + x] =
            t.v[(static_cast<std::size_t>(ch) * h + refl(y, h)) * w + refl(x, w)];
  return out;
}

template <typename T>
nn::TensorPtr<T> crop_top_left(const nn::Tensor<T>& t, int h, int w) {
  if (t.shape.size() != 3 || h > t.dim(1) || w > t.dim(2))
    fail(Errc::invalid_argument, "crop larger than tensor");
  auto out = nn::make_tensor<T>({t.dim(0), h, w});
  for (int ch = 0; ch < t.dim(0); ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out->v[(static_cast<std::size_t>(ch) * h + y) * w + x] =
            t.v[(static_cast<std::size_t>(ch) * t.dim(1) + y) * t.dim(2) + x];
  return out;
}

}  // namespace hdrtv
