#include "hdrtv/formation.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hdrtv/rng.hpp"

namespace hdrtv {

FormationConfig FormationConfig::sdr(double white) {
  FormationConfig c;
  c.tone = ToneCurveParams::sdr(white);
  c.gamut_dst = ColorSpace::rec709;
  c.transfer = Transfer::gamma22;
  c.quant_bits = 8;
  return c;
}

FormationConfig FormationConfig::hdr(double sdr_white, int bits) {
  FormationConfig c;
  c.tone = ToneCurveParams::hdr(sdr_white, 10000.0);
  c.gamut_dst = ColorSpace::rec2020;
  c.transfer = Transfer::pq;
  c.quant_bits = bits;
  return c;
}

namespace {

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Value noise: smoothstep-bilinear interpolation of lattice hashes. Pure in
// (seed, octave, channel, pixel), so any evaluation order gives the same field.
double value_noise(std::uint64_t seed, int octave, int channel, double x, double y,
                   int cell) {
  double fx = x / cell, fy = y / cell;
  std::int64_t ix = std::int64_t(std::floor(fx)), iy = std::int64_t(std::floor(fy));
  double tx = smoothstep(fx - double(ix)), ty = smoothstep(fy - double(iy));
  auto corner = [&](std::int64_t cx, std::int64_t cy) {
    return rng::uniform(seed, rng::synth_field,
                        std::uint64_t(octave) << 8 | std::uint64_t(channel),
                        std::uint64_t(cx), std::uint64_t(cy));
  };
  double v00 = corner(ix, iy), v10 = corner(ix + 1, iy);
  double v01 = corner(ix, iy + 1), v11 = corner(ix + 1, iy + 1);
  double a = v00 + (v10 - v00) * tx;
  double b = v01 + (v11 - v01) * tx;
  return a + (b - a) * ty;
}

}  // namespace

RawScene synth_raw(std::uint64_t seed, int w, int h, double dynamic_range,
                   const SynthOptions& opt) {
  if (w <= 0 || h <= 0) fail(Errc::invalid_argument, "synth_raw: dims must be positive");
  if (!(dynamic_range > 0.0)) fail(Errc::invalid_argument, "synth_raw: dynamic_range must be > 0");
  if (opt.octaves < 1) fail(Errc::invalid_argument, "synth_raw: need at least one octave");

  RawScene scene;
  scene.seed = seed;
  scene.img = ColorImage(w, h, ColorSpace::rec2020, Domain::linear);
  ColorImage& img = scene.img;

  // Shared luminance octaves + per-channel chroma octaves keep RGB correlated
  // the way real scenes are, while still covering the full gamut.
  for (int c = 0; c < 3; c++) {
    for (int y = 0; y < h; y++) {
      for (int x = 0; x < w; x++) {
        double v = 0.0, wsum = 0.0;
        for (int o = 0; o < opt.octaves; o++) {
          int cell = std::max(4, 64 >> o);
          double wo = std::pow(0.55, o);
          double lum = value_noise(seed, o, 3, x, y, cell);
          double chr = value_noise(seed, o, c, x, y, cell);
          v += wo * (0.65 * lum + 0.35 * chr);
          wsum += wo;
        }
        img.at(c, y, x) = v / wsum;
      }
    }
  }

  // Normalize exactly onto [0, dynamic_range]; min/max are order-independent.
  double lo = img.px[0], hi = img.px[0];
  for (double v : img.px) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double span = hi > lo ? hi - lo : 1.0;
  for (double& v : img.px) v = std::pow((v - lo) / span, opt.shape) * dynamic_range;

  // Saturated rectangles: one channel near the ceiling, others near zero.
  // These land outside the Rec.709 gamut after conversion and probe clipping.
  for (int k = 0; k < opt.sat_patches; k++) {
    int pw = std::max(2, int(w * rng::range(0.05, 0.15, seed, rng::synth_patch, k, 0)));
    int ph = std::max(2, int(h * rng::range(0.05, 0.15, seed, rng::synth_patch, k, 1)));
    int x0 = int(rng::index(std::uint64_t(std::max(1, w - pw)), seed, rng::synth_patch, k, 2));
    int y0 = int(rng::index(std::uint64_t(std::max(1, h - ph)), seed, rng::synth_patch, k, 3));
    int dom = k % 3;
    double col[3];
    for (int c = 0; c < 3; c++)
      col[c] = c == dom ? dynamic_range * rng::range(0.7, 1.0, seed, rng::synth_patch, k, 4)
                        : dynamic_range * rng::range(0.0, 0.08, seed, rng::synth_patch, k, 5 + c);
    for (int y = y0; y < y0 + ph && y < h; y++)
      for (int x = x0; x < x0 + pw && x < w; x++)
        for (int c = 0; c < 3; c++) img.at(c, y, x) = col[c];
  }
  return scene;
}

ColorImage form(const ColorImage& raw, const FormationConfig& cfg, int threads) {
  if (raw.space != ColorSpace::rec2020 || raw.domain != Domain::linear)
    fail(Errc::invalid_argument, "form: raw scene must be linear Rec.2020");
  ColorImage out = raw;
  hable_tonemap(out, cfg.tone, threads);
  apply_matrix(out, gamut_matrix(ColorSpace::rec2020, cfg.gamut_dst), cfg.gamut_dst, threads);
  oetf_image(out, cfg.transfer, threads);
  quantize_image(out, QuantSpec(cfg.quant_bits), threads);
  return out;
}

FormedPair make_pairs(const RawScene& raw, const FormationConfig& sdr_cfg,
                      const FormationConfig& hdr_cfg, int threads) {
  return {form(raw.img, sdr_cfg, threads), form(raw.img, hdr_cfg, threads)};
}

double adaptive_white(const ColorImage& raw) {
  if (raw.domain != Domain::linear) fail(Errc::invalid_argument, "adaptive_white: linear input required");
  auto wts = luma_weights(raw.space);
  std::vector<double> luma(raw.npx());
  const double* r = raw.plane(0);
  const double* g = raw.plane(1);
  const double* b = raw.plane(2);
  for (std::size_t i = 0; i < luma.size(); i++)
    luma[i] = wts[0] * r[i] + wts[1] * g[i] + wts[2] * b[i];
  std::size_t k = std::size_t(0.999 * double(luma.size() - 1));
  std::nth_element(luma.begin(), luma.begin() + k, luma.end());
  double w = luma[k];
  if (!(w > 0.0)) fail(Errc::numeric, "adaptive_white: percentile luma is not positive");
  return w;
}

ColorImage ldr2hdr_baseline(const ColorImage& sdr, int threads) {
  if (sdr.space != ColorSpace::rec709 || sdr.domain != Domain::encoded)
    fail(Errc::invalid_argument, "ldr2hdr_baseline: input must be encoded Rec.709");
  ColorImage out = sdr;
  eotf_image(out, Transfer::gamma22, threads);
  apply_matrix(out, gamut_matrix(ColorSpace::rec709, ColorSpace::rec2020), ColorSpace::rec2020,
               threads);
  scale_image(out, 0.01, threads);  // 100-nit white onto the 10000-nit PQ axis
  oetf_image(out, Transfer::pq, threads);
  quantize_image(out, QuantSpec(10), threads);
  return out;
}

}  // namespace hdrtv
