#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "hdrtv/color_image.hpp"
#include "hdrtv/models/agcm.hpp"
#include "hdrtv/models/le.hpp"

namespace hdrtv {

// Aligned input/target pictures, both encoded in [0,1]. Index i of `in`
// and `tgt` show the same scene through two different output pipelines.
struct PairSet {
  std::vector<ColorImage> in, tgt;
  std::size_t size() const { return in.size(); }
};

// ---------------------------------------------------------------------------
// Synthetic pair builders. All deterministic in (seed, n, w, h).

// target = input. The optimum is the identity map, which both networks can
// represent exactly, so this set separates optimizer problems from modeling
// problems.
PairSet identity_set(int n, int w, int h, std::uint64_t seed);

// One fixed tone curve for every scene: the input/target relation is a
// single per-pixel map, fully representable by a pointwise network.
PairSet global_set(int n, int w, int h, std::uint64_t seed);

// Per-scene exposure (curve white = 99.9th luma percentile) plus a mild
// unsharp boost on the target side before encoding. The exposure makes the
// relation depend on whole-image statistics; the boost makes it depend on
// the neighborhood, which no pointwise map can express.
PairSet benchmark_set(int n, int w, int h, std::uint64_t seed,
                      double detail_gain = 0.3);

// ---------------------------------------------------------------------------
// Training.

struct TrainConfig {
  int iters = 20000;
  int batch = 4;
  int patch = 96;            // enhancer and joint runs need a multiple of 4
  double lr = 4e-4;          // halved after 50% and again after 80% of the run
  double val_fraction = 0.1; // the last images of the set are held out
  int val_every = 250;
  int log_every = 50;
  std::uint64_t seed = 7;
  bool trace_nan = true;     // replay a diverged iteration with per-op checks
};

struct LogRow {
  int iter;         // 0 is the untrained baseline row
  double loss;      // minibatch loss; NaN on rows that only report validation
  double val_psnr;  // NaN on rows where validation did not run
};

struct TrainReport {
  std::vector<LogRow> log;
  int best_iter = 0;
  double best_val_psnr = 0.0;  // the weights left in the model match this row
  double train_l1_init = 0.0;  // mean |out - target| over the train split,
  double train_l1_final = 0.0; // before the run and after the best restore
};

// "iteration,loss,val_psnr" with NaN cells left empty.
void write_log_csv(const std::string& path, const std::vector<LogRow>& log);

// L1 on random patches, Adam, halving schedule, best-on-validation weights
// restored into the model on return. The condition input of each sample is
// its whole source image box-downsampled by 4, not the patch.
TrainReport train_agcm(Agcm<float>& m, const PairSet& ds, const TrainConfig& cfg);

// Same loop for the enhancer. `ds.in` is whatever the enhancer should see;
// feed it map_through_agcm() output to train the second stage.
TrainReport train_le(Le<float>& m, const PairSet& ds, const TrainConfig& cfg);

// End-to-end polish of the two-stage chain: gradients reach both models,
// the intermediate hand-off stays unclamped. Both models end up holding
// their best-on-validation weights, taken at the same iteration.
TrainReport joint_finetune(Agcm<float>& a, Le<float>& le, const PairSet& ds,
                           const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Inference. Outputs are clamped to [0,1] and tagged rec2020/encoded.

ColorImage agcm_infer(const Agcm<float>& m, const ColorImage& in);
// Same mapper with the condition vector computed from cond_src and pinned,
// which turns the whole model into a pure per-pixel color function. This is
// the form a LUT bake samples: one frame picks the modulation, any number of
// colors stream through the base stack under it.
ColorImage agcm_infer_frozen(const Agcm<float>& m, const ColorImage& in,
                             const ColorImage& cond_src);
ColorImage le_infer(const Le<float>& m, const ColorImage& in);
// The two stages chained; the hand-off between them is not clamped.
ColorImage chain_infer(const Agcm<float>& a, const Le<float>& le, const ColorImage& in);

// Replace every input with the mapper's output; targets pass through.
PairSet map_through_agcm(const Agcm<float>& m, const PairSet& ds);

// 4x4 box mean (ceil dims, partial windows at the edges): the standard
// condition input for a frame.
nn::TensorPtr<float> box_down4(const ColorImage& img);

}  // namespace hdrtv
