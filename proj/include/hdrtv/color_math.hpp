#pragma once
#include <array>
#include <cmath>

#include "hdrtv/color_image.hpp"

namespace hdrtv {

// ---------------------------------------------------------------------------
// Transfer functions (scalar, float64). Encoded and linear values are both
// normalized to [0,1]; for PQ, linear 1.0 corresponds to 10000 cd/m^2.

// SMPTE ST 2084 constants
constexpr double PQ_M1 = 0.1593017578125;  // 2610 / 16384
constexpr double PQ_M2 = 78.84375;         // 2523 / 4096 * 128
constexpr double PQ_C1 = 0.8359375;        // 3424 / 4096
constexpr double PQ_C2 = 18.8515625;       // 2413 / 4096 * 32
constexpr double PQ_C3 = 18.6875;          // 2392 / 4096 * 32

constexpr double GAMMA_EXP = 2.2;

inline double pq_oetf(double x) {
  if (x <= 0.0) return 0.0;  // the EOTF's max(.,0) clamp makes 0 <-> 0 exact
  double p = std::pow(x, PQ_M1);
  return std::pow((PQ_C1 + PQ_C2 * p) / (1.0 + PQ_C3 * p), PQ_M2);
}

inline double pq_eotf(double y) {
  if (y <= 0.0) return 0.0;
  double p = std::pow(y, 1.0 / PQ_M2);
  double num = p - PQ_C1;
  if (num < 0.0) num = 0.0;
  return std::pow(num / (PQ_C2 - PQ_C3 * p), 1.0 / PQ_M1);
}

inline double gamma_oetf(double x) { return x <= 0.0 ? 0.0 : std::pow(x, 1.0 / GAMMA_EXP); }
inline double gamma_eotf(double y) { return y <= 0.0 ? 0.0 : std::pow(y, GAMMA_EXP); }

inline double transfer_oetf(Transfer t, double x) {
  return t == Transfer::pq ? pq_oetf(x) : gamma_oetf(x);
}
inline double transfer_eotf(Transfer t, double y) {
  return t == Transfer::pq ? pq_eotf(y) : gamma_eotf(y);
}

// ---------------------------------------------------------------------------
// Filmic tone curve (Hable rational). mapped(x) = h(x)/h(white), clipped at 1.
// peak_nits only rescales the coefficients when a preset is built: h(x/s) is
// the same rational with a -> a/s^2, b -> b/s, white -> s*white, so a 10000-nit
// curve reuses the identical formula. Scene units: 1.0 = 100 cd/m^2.
struct ToneCurveParams {
  double a = 0.15, b = 0.50, c = 0.10, d = 0.20, e = 0.02, f = 0.30;
  double white = 11.2;
  double peak_nits = 100.0;

  double curve(double x) const {
    return ((x * (a * x + c * b) + d * e) / (x * (a * x + b) + d * f)) - e / f;
  }
  double map(double x) const {
    double y = curve(x) / curve(white);
    return y > 1.0 ? 1.0 : y;  // clipping is part of the model
  }
  // Inverse of map() on [0,1]; y = 1 maps back to white, inputs are clamped.
  double inverse(double y) const;

  static ToneCurveParams sdr(double white = 11.2);
  // Same curve viewed on a brighter display: scale s = peak_nits / 100.
  static ToneCurveParams hdr(double sdr_white = 11.2, double peak_nits = 10000.0);
};

// ---------------------------------------------------------------------------
// Gamut matrices, constructed from chromaticity primaries + D65 white.
struct Matrix3 {
  std::array<std::array<double, 3>, 3> m{};

  static Matrix3 identity();
  Matrix3 mul(const Matrix3& o) const;
  Matrix3 inverse() const;  // Gauss-Jordan with partial pivoting
  std::array<double, 3> apply(const std::array<double, 3>& v) const;
  double max_abs_diff(const Matrix3& o) const;
};

Matrix3 rgb_to_xyz_matrix(ColorSpace s);
Matrix3 gamut_matrix(ColorSpace src, ColorSpace dst);
// Luminance row of the RGB->XYZ matrix (the standard luma weights).
std::array<double, 3> luma_weights(ColorSpace s);

// ---------------------------------------------------------------------------
// Bit-depth quantization to the n-bit code grid: floor((2^n-1)x + 0.5)/(2^n-1).
struct QuantSpec {
  int bits = 10;
  explicit QuantSpec(int b) : bits(b) {
    if (b != 8 && b != 10 && b != 12 && b != 16)
      fail(Errc::invalid_argument, "quantizer bit depth must be 8, 10, 12 or 16");
  }
};

inline double quantize_value(double x, int bits) {
  if (x < 0.0) x = 0.0;
  if (x > 1.0) x = 1.0;
  double levels = double((1u << bits) - 1);
  return std::floor(levels * x + 0.5) / levels;
}

// ---------------------------------------------------------------------------
// Image ops. All are per-pixel and deterministic; `threads > 1` runs rows under
// OpenMP with results bitwise identical to the serial path. Ops validate the
// image tags and reject NaN inputs.

void hable_tonemap(ColorImage& img, const ToneCurveParams& tc, int threads = 1);
void apply_matrix(ColorImage& img, const Matrix3& m, ColorSpace dst, int threads = 1);
// Linear -> encoded. Out-of-range inputs are clamped and counted in warnings().
void oetf_image(ColorImage& img, Transfer t, int threads = 1);
// Encoded -> linear.
void eotf_image(ColorImage& img, Transfer t, int threads = 1);
void quantize_image(ColorImage& img, const QuantSpec& q, int threads = 1);
void scale_image(ColorImage& img, double k, int threads = 1);

}  // namespace hdrtv
