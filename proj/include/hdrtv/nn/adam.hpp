#pragma once
#include <unordered_map>

#include "hdrtv/nn/tensor.hpp"

namespace hdrtv::nn {

// Adam with bias correction. Moment buffers are keyed by tensor identity and
// live in the same precision as the parameters, so a float run is bitwise
// reproducible. step() consumes and clears the gradients.
template <typename T>
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  long long step_count() const { return t_; }

  void step(const std::vector<TensorPtr<T>>& params) {
    ++t_;
    const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
    const T corr1 = static_cast<T>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
    const T corr2 = static_cast<T>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
    const T alpha = static_cast<T>(lr_), eps = static_cast<T>(eps_);
    for (const auto& p : params) {
      Slot& s = slots_[p.get()];
      if (s.m.size() != p->numel()) {
        s.m.assign(p->numel(), T(0));
        s.v.assign(p->numel(), T(0));
      }
      for (std::size_t i = 0; i < p->numel(); ++i) {
        const T gr = p->g[i];
        s.m[i] = b1 * s.m[i] + (T(1) - b1) * gr;
        s.v[i] = b2 * s.v[i] + (T(1) - b2) * gr * gr;
        const T mhat = s.m[i] / corr1;
        const T vhat = s.v[i] / corr2;
        p->v[i] -= alpha * mhat / (std::sqrt(vhat) + eps);
        p->g[i] = T(0);
      }
    }
  }

 private:
  struct Slot {
    std::vector<T> m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::unordered_map<const Tensor<T>*, Slot> slots_;
};

}  // namespace hdrtv::nn
