#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "hdrtv/color_math.hpp"
#include "hdrtv/rng.hpp"

using namespace hdrtv;

// Expected values in this file were produced by a standalone oracle program
// (separate code paths: Cramer inverses, direct formula evaluation) and frozen.

TEST_SUITE_BEGIN("color_math");

TEST_CASE("transfer function fixed points and frozen values") {
  CHECK(gamma_oetf(0.0) == 0.0);
  CHECK(gamma_oetf(1.0) == 1.0);
  CHECK(gamma_oetf(0.25) == doctest::Approx(0.53252054471998134).epsilon(1e-14));
  CHECK(gamma_eotf(0.5) == doctest::Approx(0.217637640824031).epsilon(1e-14));

  CHECK(pq_oetf(0.0) == 0.0);
  CHECK(pq_oetf(1.0) == 1.0);
  // 100 nits on the 10000-nit axis encodes just above mid-code
  CHECK(pq_oetf(0.01) == doctest::Approx(0.50807842151739901).epsilon(1e-14));
  CHECK(pq_oetf(0.5) == doctest::Approx(0.9265467040826304).epsilon(1e-14));
  CHECK(pq_eotf(0.5) == doctest::Approx(0.0092245708994065263).epsilon(1e-14));
  CHECK(pq_eotf(0.0) == 0.0);
}

TEST_CASE("transfer round trips on a dense grid") {
  for (int i = 0; i <= 2000; i++) {
    double x = i / 2000.0;
    CHECK(std::fabs(gamma_eotf(gamma_oetf(x)) - x) <= 1e-9);
    CHECK(std::fabs(gamma_oetf(gamma_eotf(x)) - x) <= 1e-9);
    CHECK(std::fabs(pq_eotf(pq_oetf(x)) - x) <= 1e-6);
    CHECK(std::fabs(pq_oetf(pq_eotf(x)) - x) <= 1e-6);
  }
}

TEST_CASE("transfer functions are strictly increasing") {
  double pg = -1.0, pp = -1.0;
  for (int i = 0; i <= 1000; i++) {
    double x = i / 1000.0;
    double g = gamma_oetf(x), p = pq_oetf(x);
    CHECK(g > pg);
    CHECK(p > pp);
    pg = g;
    pp = p;
  }
}

TEST_CASE("hable curve normalization and frozen points") {
  ToneCurveParams tc = ToneCurveParams::sdr();
  CHECK(tc.map(0.0) == 0.0);
  CHECK(tc.map(tc.white) == 1.0);
  CHECK(tc.map(1.0) == doctest::Approx(0.30430056146724699).epsilon(1e-13));
  CHECK(tc.map(0.18) == doctest::Approx(0.067109829282901753).epsilon(1e-13));
  // clipping is part of the model
  CHECK(tc.map(2.0 * tc.white) == 1.0);

  double prev = -1.0;
  for (int i = 0; i <= 500; i++) {
    double x = 20.0 * i / 500.0;
    double y = tc.map(x);
    CHECK(y >= prev);
    CHECK(y <= 1.0);
    prev = y;
  }
}

TEST_CASE("hable inverse matches forward where defined") {
  ToneCurveParams tc = ToneCurveParams::sdr();
  for (int i = 0; i <= 400; i++) {
    double x = tc.white * i / 400.0;
    double rt = tc.inverse(tc.map(x));
    CHECK(std::fabs(rt - x) <= 1e-8 * std::max(1.0, x));
  }
  for (int i = 0; i <= 400; i++) {
    double y = i / 400.0;
    CHECK(std::fabs(tc.map(tc.inverse(y)) - y) <= 1e-10);
  }
  CHECK(tc.inverse(1.0) == tc.white);
  CHECK(tc.inverse(0.0) == 0.0);
}

TEST_CASE("hdr tone preset is the 100x-rescaled curve") {
  ToneCurveParams sdr = ToneCurveParams::sdr(11.2);
  ToneCurveParams hdr = ToneCurveParams::hdr(11.2, 10000.0);
  CHECK(hdr.white == doctest::Approx(1120.0));
  CHECK(hdr.map(hdr.white) == 1.0);
  for (int i = 0; i <= 300; i++) {
    double x = 1200.0 * i / 300.0;
    double ref = sdr.curve(x / 100.0) / sdr.curve(11.2);
    if (ref > 1.0) ref = 1.0;
    CHECK(hdr.map(x) == doctest::Approx(ref).epsilon(1e-12));
  }
  // brighter display keeps more headroom: saturates later than the SDR curve
  CHECK(hdr.map(11.2) < 0.1);
  CHECK(sdr.map(11.2) == 1.0);
}

TEST_CASE("tone curve rejects bad white") {
  CHECK_THROWS_AS(ToneCurveParams::sdr(0.0), Error);
  CHECK_THROWS_AS(ToneCurveParams::sdr(-1.0), Error);
}

TEST_CASE("gamut matrix matches the independent primaries construction") {
  Matrix3 t = gamut_matrix(ColorSpace::rec709, ColorSpace::rec2020);
  const double want[3][3] = {
      {0.62740389593469903, 0.32928303837788381, 0.043313065687417218},
      {0.069097289358231992, 0.91954039507545904, 0.011362315566309157},
      {0.016391438875150228, 0.088013307877225777, 0.89559525324762401}};
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++) CHECK(t.m[i][j] == doctest::Approx(want[i][j]).epsilon(1e-11));

  // headline check against the published matrix values
  auto red = t.apply({1.0, 0.0, 0.0});
  CHECK(std::fabs(red[0] - 0.6274) <= 2e-4);
  CHECK(std::fabs(red[1] - 0.0691) <= 2e-4);
  CHECK(std::fabs(red[2] - 0.0164) <= 2e-4);
}

TEST_CASE("gamut matrices round trip and preserve white") {
  ColorSpace sp[] = {ColorSpace::rec709, ColorSpace::rec2020, ColorSpace::xyz};
  for (ColorSpace a : sp)
    for (ColorSpace b : sp) {
      Matrix3 fwd = gamut_matrix(a, b);
      Matrix3 bwd = gamut_matrix(b, a);
      CHECK(fwd.mul(bwd).max_abs_diff(Matrix3::identity()) <= 1e-9);
      if (a == b) CHECK(fwd.max_abs_diff(Matrix3::identity()) == 0.0);
    }
  auto w = gamut_matrix(ColorSpace::rec709, ColorSpace::rec2020).apply({1.0, 1.0, 1.0});
  for (double v : w) CHECK(std::fabs(v - 1.0) <= 1e-6);
}

TEST_CASE("luma weights come out at the standard coefficients") {
  auto w709 = luma_weights(ColorSpace::rec709);
  CHECK(std::fabs(w709[0] - 0.2126) <= 1e-4);
  CHECK(std::fabs(w709[1] - 0.7152) <= 1e-4);
  CHECK(std::fabs(w709[2] - 0.0722) <= 1e-4);
  auto w2020 = luma_weights(ColorSpace::rec2020);
  CHECK(std::fabs(w2020[0] - 0.2627) <= 1e-4);
  CHECK(std::fabs(w2020[1] - 0.6780) <= 1e-4);
  CHECK(std::fabs(w2020[2] - 0.0593) <= 1e-4);
}

TEST_CASE("quantizer frozen codes, bound, idempotence") {
  // 0.3*255 rounds to exactly 76.5 in IEEE, so the code is 77
  CHECK(quantize_value(0.3, 8) == doctest::Approx(0.30196078431372547).epsilon(1e-15));
  CHECK(quantize_value(0.5, 10) == doctest::Approx(0.50048875855327468).epsilon(1e-15));
  CHECK(quantize_value(0.7, 10) == doctest::Approx(0.69990224828934511).epsilon(1e-15));
  CHECK(quantize_value(0.0, 8) == 0.0);
  CHECK(quantize_value(1.0, 8) == 1.0);

  for (int bits : {8, 10, 12, 16}) {
    double half_step = 0.5 / double((1u << bits) - 1);
    for (int i = 0; i < 5000; i++) {
      double x = rng::uniform(7, rng::bench, i, bits);
      double q = quantize_value(x, bits);
      CHECK(std::fabs(q - x) <= half_step + 1e-15);
      CHECK(quantize_value(q, bits) == q);
    }
  }
  CHECK_THROWS_AS(QuantSpec(9), Error);
  CHECK_THROWS_AS(QuantSpec(0), Error);
}

namespace {

ColorImage random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  ColorImage img(w, h, ColorSpace::rec2020, Domain::linear);
  for (int c = 0; c < 3; c++)
    for (int y = 0; y < h; y++)
      for (int x = 0; x < w; x++)
        img.at(c, y, x) = rng::range(lo, hi, seed, rng::bench, c, y * 10000 + x);
  return img;
}

}  // namespace

TEST_CASE("image ops validate tags") {
  ColorImage img = random_image(8, 8, 1);
  ColorImage enc = img;
  enc.domain = Domain::encoded;
  CHECK_THROWS_AS(oetf_image(enc, Transfer::pq), Error);
  CHECK_THROWS_AS(apply_matrix(enc, Matrix3::identity(), ColorSpace::rec2020), Error);
  CHECK_THROWS_AS(hable_tonemap(enc, ToneCurveParams::sdr()), Error);
  CHECK_THROWS_AS(eotf_image(img, Transfer::pq), Error);
  CHECK_THROWS_AS(quantize_image(img, QuantSpec(8)), Error);
}

TEST_CASE("NaN input is an error, not a warning") {
  ColorImage img = random_image(4, 4, 2);
  img.at(1, 2, 3) = std::nan("");
  ColorImage a = img;
  CHECK_THROWS_AS(oetf_image(a, Transfer::pq), Error);
  ColorImage b = img;
  CHECK_THROWS_AS(apply_matrix(b, Matrix3::identity(), ColorSpace::rec2020), Error);
  ColorImage c = img;
  CHECK_THROWS_AS(hable_tonemap(c, ToneCurveParams::sdr()), Error);
}

TEST_CASE("negative linear input to hable is rejected") {
  ColorImage img = random_image(4, 4, 3);
  img.at(0, 0, 0) = -0.25;
  CHECK_THROWS_AS(hable_tonemap(img, ToneCurveParams::sdr()), Error);
}

TEST_CASE("oetf clamps out-of-range input and counts it") {
  warnings().reset();
  ColorImage img(2, 2, ColorSpace::rec709, Domain::linear);
  img.at(0, 0, 0) = -0.5;
  img.at(1, 0, 1) = 1.5;
  img.at(2, 1, 0) = 0.25;
  oetf_image(img, Transfer::gamma22);
  CHECK(img.at(0, 0, 0) == 0.0);
  CHECK(img.at(1, 0, 1) == 1.0);
  CHECK(warnings().oetf_clamped_low.load() == 1);
  CHECK(warnings().oetf_clamped_high.load() == 1);
  warnings().reset();
}

TEST_CASE("ops are bitwise independent of thread count") {
  ColorImage base = random_image(37, 23, 11, 0.0, 14.0);
  for (int threads : {2, 3, 8}) {
    ColorImage a = base, b = base;
    hable_tonemap(a, ToneCurveParams::sdr(), 1);
    hable_tonemap(b, ToneCurveParams::sdr(), threads);
    CHECK(a.px == b.px);
    Matrix3 m = gamut_matrix(ColorSpace::rec2020, ColorSpace::rec709);
    ColorImage c = a, d = a;
    apply_matrix(c, m, ColorSpace::rec709, 1);
    apply_matrix(d, m, ColorSpace::rec709, threads);
    CHECK(c.px == d.px);
    oetf_image(c, Transfer::gamma22, 1);
    oetf_image(d, Transfer::gamma22, threads);
    CHECK(c.px == d.px);
    quantize_image(c, QuantSpec(8), 1);
    quantize_image(d, QuantSpec(8), threads);
    CHECK(c.px == d.px);
  }
  warnings().reset();
}

TEST_CASE("per-pixel ops commute with pixel permutation") {
  ColorImage img = random_image(16, 9, 17, 0.0, 12.0);
  std::vector<std::size_t> perm(img.npx());
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; i--)
    std::swap(perm[i - 1], perm[rng::index(i, 99, rng::bench, i)]);

  auto permute = [&](const ColorImage& src) {
    ColorImage out = src;
    for (int c = 0; c < 3; c++)
      for (std::size_t i = 0; i < perm.size(); i++) out.plane(c)[i] = src.plane(c)[perm[i]];
    return out;
  };

  auto pipeline = [](ColorImage v) {
    hable_tonemap(v, ToneCurveParams::sdr());
    apply_matrix(v, gamut_matrix(ColorSpace::rec2020, ColorSpace::rec709), ColorSpace::rec709);
    oetf_image(v, Transfer::gamma22);
    quantize_image(v, QuantSpec(8));
    return v;
  };

  ColorImage a = permute(pipeline(img));
  ColorImage b = pipeline(permute(img));
  CHECK(a.px == b.px);
  warnings().reset();
}

TEST_SUITE_END();
