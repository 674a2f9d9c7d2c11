#pragma once
#include <functional>

#include "hdrtv/nn/tensor.hpp"
#include "hdrtv/rng.hpp"

namespace hdrtv::nn {

struct LossEval {
  double loss;
  double kink;  // min distance to a piecewise-linear kink during that forward
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  int checked = 0;
  int skipped = 0;  // coordinates too close to a kink for central differences
};

// Central-difference verification of analytic gradients, in double.
//
// loss_fn rebuilds the whole graph from the current parameter values and
// returns the loss plus the kink distance of that forward; grad_fn runs one
// backward pass leaving gradients in the parameters. A coordinate whose
// perturbed evaluations pass within 4h of a relu or |.| kink is skipped:
// the two-sided probe would straddle a slope change and measure garbage.
inline GradCheckReport grad_check(const std::function<LossEval()>& loss_fn,
                                  const std::function<void()>& grad_fn,
                                  const std::vector<TensorPtr<double>>& params, double h = 1e-3,
                                  int coords_per_tensor = 24, std::uint64_t seed = 0) {
  if (h <= 0) fail(Errc::invalid_argument, "grad_check: h must be positive");
  for (const auto& p : params) p->zero_grad();
  grad_fn();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p->g);

  GradCheckReport rep;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = *params[pi];
    const std::size_t m = p.numel();
    const std::size_t draws =
        m <= static_cast<std::size_t>(coords_per_tensor) ? m : static_cast<std::size_t>(coords_per_tensor);
    for (std::size_t d = 0; d < draws; ++d) {
      const std::size_t i =
          m <= static_cast<std::size_t>(coords_per_tensor)
              ? d
              : rng::index(m, seed, rng::Stream::grad_probe, pi, d);
      const double saved = p.v[i];
      p.v[i] = saved + h;
      const LossEval up = loss_fn();
      p.v[i] = saved - h;
      const LossEval dn = loss_fn();
      p.v[i] = saved;
      if (std::min(up.kink, dn.kink) < 4.0 * h) {
        ++rep.skipped;
        continue;
      }
      const double numeric = (up.loss - dn.loss) / (2.0 * h);
      const double a = analytic[pi][i];
      const double rel =
          std::abs(numeric - a) / std::max({std::abs(numeric), std::abs(a), 1e-6});
      if (rel > rep.max_rel_err) rep.max_rel_err = rel;
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace hdrtv::nn
