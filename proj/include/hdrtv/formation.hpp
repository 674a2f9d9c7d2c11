#pragma once
#include <cstdint>

#include "hdrtv/color_math.hpp"

namespace hdrtv {

// How a scene becomes a broadcast picture: tone curve, gamut map, transfer
// encode, bit-depth quantize. One config per output flavor (SDR or HDR).
struct FormationConfig {
  ToneCurveParams tone;
  ColorSpace gamut_dst = ColorSpace::rec709;
  Transfer transfer = Transfer::gamma22;
  int quant_bits = 8;

  // 100-nit Rec.709/gamma output, 8-bit
  static FormationConfig sdr(double white = 11.2);
  // 10000-nit Rec.2020/PQ output, 10-bit. Same scene white as the SDR config.
  static FormationConfig hdr(double sdr_white = 11.2, int bits = 10);
};

// Scene-linear Rec.2020 radiance, 1.0 = 100 cd/m^2, values in [0, dynamic_range].
struct RawScene {
  ColorImage img;
  std::uint64_t seed = 0;
};

struct SynthOptions {
  int octaves = 4;
  int sat_patches = 4;     // saturated rectangles probing the gamut boundary
  double shape = 1.8;      // field is raised to this power: sparse highlights
};

// Deterministic multi-scale value-noise scene. Same (seed, w, h) is bitwise
// reproducible; generation is keyed per pixel so evaluation order is free.
RawScene synth_raw(std::uint64_t seed, int w, int h, double dynamic_range,
                   const SynthOptions& opt = {});

// quantize(oetf(gamut(tone(raw)))) — raw must be scene-linear Rec.2020.
ColorImage form(const ColorImage& raw, const FormationConfig& cfg, int threads = 1);

struct FormedPair {
  ColorImage sdr, hdr;
};
FormedPair make_pairs(const RawScene& raw, const FormationConfig& sdr_cfg,
                      const FormationConfig& hdr_cfg, int threads = 1);

// 99.9th percentile of scene luma: the default adaptive tone-curve white.
double adaptive_white(const ColorImage& raw);

// Fixed reference upconversion: decode the SDR picture, rescale 100-nit light
// onto the 10000-nit axis, re-encode as 10-bit PQ/Rec.2020.
ColorImage ldr2hdr_baseline(const ColorImage& sdr, int threads = 1);

}  // namespace hdrtv
