#include <doctest.h>

#include <cmath>
#include <set>

#include "hdrtv/formation.hpp"

using namespace hdrtv;

namespace {

double inline_psnr(const ColorImage& a, const ColorImage& b) {
  double se = 0.0;
  for (std::size_t i = 0; i < a.px.size(); i++) {
    double d = a.px[i] - b.px[i];
    se += d * d;
  }
  double mse = se / double(a.px.size());
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace

TEST_SUITE_BEGIN("formation");

TEST_CASE("synthetic scenes are seeded and bounded") {
  RawScene a = synth_raw(42, 96, 64, 8.0);
  RawScene b = synth_raw(42, 96, 64, 8.0);
  RawScene c = synth_raw(43, 96, 64, 8.0);
  CHECK(a.img.px == b.img.px);
  CHECK(a.img.px != c.img.px);

  double lo = 1e9, hi = -1e9;
  for (double v : a.img.px) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= 0.0);
  CHECK(hi <= 8.0);

  RawScene unit = synth_raw(7, 64, 64, 1.0);
  double mx = 0.0;
  for (double v : unit.img.px) mx = std::max(mx, v);
  CHECK(mx <= 1.0);

  std::set<double> distinct(a.img.px.begin(), a.img.px.end());
  CHECK(distinct.size() >= 100);

  CHECK_THROWS_AS(synth_raw(1, 0, 32, 1.0), Error);
  CHECK_THROWS_AS(synth_raw(1, 32, 32, 0.0), Error);
}

TEST_CASE("form equals the hand-composed stage pipeline") {
  RawScene s = synth_raw(5, 48, 32, 12.0);
  FormationConfig cfg = FormationConfig::sdr();

  ColorImage manual = s.img;
  hable_tonemap(manual, cfg.tone);
  apply_matrix(manual, gamut_matrix(ColorSpace::rec2020, ColorSpace::rec709), ColorSpace::rec709);
  oetf_image(manual, cfg.transfer);
  quantize_image(manual, QuantSpec(cfg.quant_bits));

  ColorImage got = form(s.img, cfg);
  CHECK(got.px == manual.px);
  CHECK(got.space == ColorSpace::rec709);
  CHECK(got.domain == Domain::encoded);
  warnings().reset();
}

TEST_CASE("formed pairs carry the right tags and code grids") {
  RawScene s = synth_raw(9, 64, 48, 10.0);
  FormedPair p = make_pairs(s, FormationConfig::sdr(), FormationConfig::hdr());
  CHECK(p.sdr.space == ColorSpace::rec709);
  CHECK(p.hdr.space == ColorSpace::rec2020);
  CHECK(p.sdr.domain == Domain::encoded);
  CHECK(p.hdr.domain == Domain::encoded);
  for (double v : p.sdr.px) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v * 255.0 == doctest::Approx(std::floor(v * 255.0 + 0.5)).epsilon(1e-9));
  }
  for (std::size_t i = 0; i < p.hdr.px.size(); i += 97) {
    double v = p.hdr.px[i];
    CHECK(v * 1023.0 == doctest::Approx(std::floor(v * 1023.0 + 0.5)).epsilon(1e-9));
  }
  warnings().reset();
}

TEST_CASE("identical pipelines are deterministic end to end") {
  RawScene s = synth_raw(21, 40, 40, 6.0);
  FormedPair p1 = make_pairs(s, FormationConfig::sdr(), FormationConfig::hdr());
  FormedPair p2 = make_pairs(s, FormationConfig::sdr(), FormationConfig::hdr());
  CHECK(p1.sdr.px == p2.sdr.px);
  CHECK(p1.hdr.px == p2.hdr.px);
  warnings().reset();
}

TEST_CASE("SDR clips a luminance ramp before HDR does") {
  const int n = 2048;
  const double dr = 30.0;
  ColorImage ramp(n, 1, ColorSpace::rec2020, Domain::linear);
  for (int x = 0; x < n; x++)
    for (int c = 0; c < 3; c++) ramp.at(c, 0, x) = dr * x / double(n - 1);

  ColorImage sdr = form(ramp, FormationConfig::sdr());
  ColorImage hdr = form(ramp, FormationConfig::hdr());

  auto first_at_ceiling = [n](const ColorImage& img) {
    for (int x = 0; x < n; x++)
      if (img.at(0, 0, x) >= 1.0) return x;
    return n;
  };
  int sdr_clip = first_at_ceiling(sdr);
  int hdr_clip = first_at_ceiling(hdr);
  CHECK(sdr_clip < n);       // the SDR pipe does clip within this range
  CHECK(sdr_clip < hdr_clip);

  // information loss: distinct raw values collide in SDR but not in HDR
  int collisions = 0;
  for (int x = sdr_clip + 1; x < n; x++) {
    bool same_sdr = sdr.at(0, 0, x) == sdr.at(0, 0, x - 1) &&
                    sdr.at(1, 0, x) == sdr.at(1, 0, x - 1) &&
                    sdr.at(2, 0, x) == sdr.at(2, 0, x - 1);
    bool diff_hdr = hdr.at(0, 0, x) != hdr.at(0, 0, x - 1) ||
                    hdr.at(1, 0, x) != hdr.at(1, 0, x - 1) ||
                    hdr.at(2, 0, x) != hdr.at(2, 0, x - 1);
    if (same_sdr && diff_hdr) collisions++;
  }
  CHECK(collisions > 0);
  warnings().reset();
}

TEST_CASE("scene white maps to SDR reference white") {
  ColorImage one(4, 4, ColorSpace::rec2020, Domain::linear);
  FormationConfig cfg = FormationConfig::sdr(11.2);
  for (auto& v : one.px) v = 11.2;
  ColorImage out = form(one, cfg);
  for (double v : out.px) CHECK(v == 1.0);
  warnings().reset();
}

TEST_CASE("adaptive white picks the 99.9th percentile luma") {
  ColorImage cst(50, 40, ColorSpace::rec2020, Domain::linear);
  for (auto& v : cst.px) v = 3.5;
  CHECK(adaptive_white(cst) == doctest::Approx(3.5).epsilon(1e-9));

  const int n = 100000;
  ColorImage ramp(n, 1, ColorSpace::rec2020, Domain::linear);
  for (int x = 0; x < n; x++)
    for (int c = 0; c < 3; c++) ramp.at(c, 0, x) = 20.0 * x / double(n - 1);
  CHECK(adaptive_white(ramp) == doctest::Approx(0.999 * 20.0).epsilon(0.01));

  ColorImage zero(8, 8, ColorSpace::rec2020, Domain::linear);
  CHECK_THROWS_AS(adaptive_white(zero), Error);

  // the exposure link: a gray pixel at the adaptive white encodes to 1.0
  RawScene s = synth_raw(3, 64, 64, 16.0);
  double aw = adaptive_white(s.img);
  ColorImage probe(2, 2, ColorSpace::rec2020, Domain::linear);
  for (auto& v : probe.px) v = aw;
  ColorImage enc = form(probe, FormationConfig::sdr(aw));
  for (double v : enc.px) CHECK(v == 1.0);
  warnings().reset();
}

TEST_CASE("baseline upconversion composes the documented stages") {
  RawScene s = synth_raw(13, 48, 48, 14.0);
  ColorImage sdr = form(s.img, FormationConfig::sdr());

  ColorImage manual = sdr;
  eotf_image(manual, Transfer::gamma22);
  apply_matrix(manual, gamut_matrix(ColorSpace::rec709, ColorSpace::rec2020), ColorSpace::rec2020);
  scale_image(manual, 0.01);
  oetf_image(manual, Transfer::pq);
  quantize_image(manual, QuantSpec(10));

  ColorImage got = ldr2hdr_baseline(sdr);
  CHECK(got.px == manual.px);
  CHECK(got.space == ColorSpace::rec2020);

  // SDR reference white lands at the 100-nit PQ code
  ColorImage white(2, 2, ColorSpace::rec709, Domain::encoded);
  for (auto& v : white.px) v = 1.0;
  ColorImage hw = ldr2hdr_baseline(white);
  double want = quantize_value(pq_oetf(0.01), 10);
  for (double v : hw.px) CHECK(v == doctest::Approx(want).epsilon(1e-12));

  CHECK_THROWS_AS(ldr2hdr_baseline(s.img), Error);  // must be encoded Rec.709
  warnings().reset();
}

TEST_CASE("the baseline leaves a real gap to the formed HDR") {
  RawScene s = synth_raw(31, 128, 96, 24.0);
  FormedPair p = make_pairs(s, FormationConfig::sdr(), FormationConfig::hdr());
  ColorImage up = ldr2hdr_baseline(p.sdr);
  double psnr = inline_psnr(up, p.hdr);
  CHECK(psnr < 30.0);  // the two encodings genuinely differ
  CHECK(psnr > 5.0);   // but they describe the same scene
  warnings().reset();
}

TEST_SUITE_END();
