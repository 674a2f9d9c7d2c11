#pragma once
#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <unordered_map>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "hdrtv/error.hpp"

namespace hdrtv::nn {

namespace detail {

// Activation and gradient buffers are megabytes each and churn every training
// step. By default glibc serves blocks this large straight from mmap and
// returns them to the kernel on free, so each step pays page faults on memory
// it just released. Raising the thresholds keeps the buffers in the arena.
inline const bool arena_reuse = [] {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 64 << 20);
#endif
  return true;
}();

// Recycles exact-size buffers between short-lived graph tensors. A training
// step retires a few hundred activation buffers whose sizes repeat step after
// step; reuse dodges the allocator round trip and, where the new owner will
// overwrite every element anyway, the zero fill. Not thread safe: tensor
// graphs are built and torn down on one thread by contract.
template <typename T>
class BufferPool {
 public:
  static BufferPool& instance() {
    static BufferPool p;
    return p;
  }

  // Returns a buffer of exactly n elements with unspecified contents, or an
  // empty vector when none is banked.
  std::vector<T> take(std::size_t n) {
    auto it = free_.find(n);
    if (it == free_.end() || it->second.empty()) return {};
    std::vector<T> b = std::move(it->second.back());
    it->second.pop_back();
    return b;
  }

  void give(std::vector<T>&& b) {
    if (b.empty()) return;
    auto& stack = free_[b.size()];
    // Per-size cap so one outsized phase cannot pin memory forever.
    if (stack.size() < 64 && (stack.size() + 1) * b.size() * sizeof(T) <= max_class_bytes)
      stack.push_back(std::move(b));
  }

 private:
  static constexpr std::size_t max_class_bytes = 256u << 20;
  std::unordered_map<std::size_t, std::vector<std::vector<T>>> free_;
};

}  // namespace detail

// Dense tensor with a gradient buffer of the same shape. Shapes in use are
// (C,H,W) for feature maps, (Co,Ci) / (Co,Ci,3,3) for conv weights, (N) for
// vectors and (1) for scalars such as losses.
//
// Fill::zeroed gives the usual fresh tensor. Fill::raw leaves the values
// unspecified; it exists for op outputs, which overwrite every element
// before anyone reads them. The gradient buffer, when present, always starts
// at zero because backward accumulates into it. with_grad=false skips the
// gradient buffer entirely for forward-only graphs.
template <typename T>
struct Tensor {
  enum class Fill { zeroed, raw };

  std::vector<int> shape;
  std::vector<T> v;
  std::vector<T> g;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, Fill fill = Fill::zeroed, bool with_grad = true)
      : shape(std::move(s)) {
    (void)detail::arena_reuse;
    std::size_t n = 1;
    for (int d : shape) {
      if (d <= 0) fail(Errc::invalid_argument, "tensor dims must be positive");
      n *= static_cast<std::size_t>(d);
    }
    auto& pool = detail::BufferPool<T>::instance();
    v = pool.take(n);
    if (v.size() != n)
      v.assign(n, T(0));
    else if (fill == Fill::zeroed)
      std::fill(v.begin(), v.end(), T(0));
    if (with_grad) {
      g = pool.take(n);
      if (g.size() != n)
        g.assign(n, T(0));
      else
        std::fill(g.begin(), g.end(), T(0));
    }
  }
  ~Tensor() {
    auto& pool = detail::BufferPool<T>::instance();
    pool.give(std::move(v));
    pool.give(std::move(g));
  }
  Tensor(const Tensor&) = default;
  Tensor(Tensor&&) = default;
  Tensor& operator=(const Tensor&) = default;
  Tensor& operator=(Tensor&&) = default;

  std::size_t numel() const { return v.size(); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  void zero_grad() { std::fill(g.begin(), g.end(), T(0)); }
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <typename T>
TensorPtr<T> make_tensor(std::vector<int> shape) {
  return std::make_shared<Tensor<T>>(std::move(shape));
}

template <typename T>
bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape == b.shape;
}

// Pooled scratch memory with unspecified contents, for op workspaces (im2col
// panels and the like) that are fully written before being read.
template <typename T>
class Scratch {
 public:
  explicit Scratch(std::size_t n) : b_(detail::BufferPool<T>::instance().take(n)) {
    if (b_.size() != n) {
      b_.clear();
      b_.resize(n);
    }
  }
  ~Scratch() { detail::BufferPool<T>::instance().give(std::move(b_)); }
  Scratch(const Scratch&) = delete;
  Scratch& operator=(const Scratch&) = delete;

  T* data() { return b_.data(); }
  const T* data() const { return b_.data(); }
  std::size_t size() const { return b_.size(); }

 private:
  std::vector<T> b_;
};

}  // namespace hdrtv::nn
