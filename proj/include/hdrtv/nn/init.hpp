#pragma once
#include "hdrtv/nn/tensor.hpp"
#include "hdrtv/rng.hpp"

namespace hdrtv::nn {

// Uniform(-bound, bound) with bound = sqrt(6 / fan_in), the variance-scaled
// init that keeps pre-activation magnitudes steady through ReLU stacks.
// Each element is keyed by (seed, param_index, element), so initialization
// order does not matter and adding a parameter never reshuffles the others.
template <typename T>
void he_uniform(Tensor<T>& t, int fan_in, std::uint64_t seed, std::uint64_t param_index) {
  if (fan_in <= 0) fail(Errc::invalid_argument, "he_uniform: fan_in must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.numel(); ++i)
    t.v[i] = static_cast<T>(
        (rng::uniform(seed, rng::Stream::weight_init, param_index, i) * 2.0 - 1.0) * bound);
}

template <typename T>
void fill_value(Tensor<T>& t, T value) {
  std::fill(t.v.begin(), t.v.end(), value);
}

}  // namespace hdrtv::nn
