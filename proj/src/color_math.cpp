#include "hdrtv/color_math.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace hdrtv {

namespace {

struct Chromaticity {
  double x, y;
};
struct Primaries {
  Chromaticity r, g, b, w;
};

// D65 white point per the defining standards
constexpr Chromaticity D65{0.3127, 0.3290};

Primaries primaries_of(ColorSpace s) {
  switch (s) {
    case ColorSpace::rec709:
      return {{0.64, 0.33}, {0.30, 0.60}, {0.15, 0.06}, D65};
    case ColorSpace::rec2020:
      return {{0.708, 0.292}, {0.170, 0.797}, {0.131, 0.046}, D65};
    case ColorSpace::xyz:
      break;
  }
  fail(Errc::invalid_argument, "no primaries for XYZ");
}

std::array<double, 3> xyz_of(Chromaticity c) {
  return {c.x / c.y, 1.0, (1.0 - c.x - c.y) / c.y};
}

template <class F>
void for_rows(int h, int threads, F&& body) {
  if (threads <= 1) {
    for (int y = 0; y < h; y++) body(y);
  } else {
#pragma omp parallel for num_threads(threads) schedule(static)
    for (int y = 0; y < h; y++) body(y);
  }
}

[[noreturn]] void nan_error(const char* op) {
  fail(Errc::numeric, std::string(op) + ": NaN in input");
}

}  // namespace

// ---------------------------------------------------------------------------

double ToneCurveParams::inverse(double y) const {
  if (y <= 0.0) return 0.0;
  if (y >= 1.0) return white;
  // Solve h(x) = y*h(white): a(1-r)x^2 + b(c-r)x + d(e - r*f) = 0 with
  // r = y*h(white) + e/f. Root product is negative, so the positive root is it.
  double r = y * curve(white) + e / f;
  double qa = a * (1.0 - r);
  double qb = b * (c - r);
  double qc = d * (e - r * f);
  double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) disc = 0.0;
  return (-qb + std::sqrt(disc)) / (2.0 * qa);
}

ToneCurveParams ToneCurveParams::sdr(double white) {
  if (!(white > 0.0)) fail(Errc::invalid_argument, "tone curve white must be > 0");
  ToneCurveParams t;
  t.white = white;
  t.peak_nits = 100.0;
  return t;
}

ToneCurveParams ToneCurveParams::hdr(double sdr_white, double peak_nits) {
  if (!(sdr_white > 0.0)) fail(Errc::invalid_argument, "tone curve white must be > 0");
  if (!(peak_nits > 0.0)) fail(Errc::invalid_argument, "peak_nits must be > 0");
  double s = peak_nits / 100.0;
  ToneCurveParams t;
  t.a /= s * s;
  t.b /= s;
  t.white = sdr_white * s;
  t.peak_nits = peak_nits;
  return t;
}

// ---------------------------------------------------------------------------

Matrix3 Matrix3::identity() {
  Matrix3 r;
  for (int i = 0; i < 3; i++) r.m[i][i] = 1.0;
  return r;
}

Matrix3 Matrix3::mul(const Matrix3& o) const {
  Matrix3 r;
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++) {
      double s = 0.0;
      for (int k = 0; k < 3; k++) s += m[i][k] * o.m[k][j];
      r.m[i][j] = s;
    }
  return r;
}

Matrix3 Matrix3::inverse() const {
  // Gauss-Jordan with partial pivoting; 3x3 gamut matrices are well conditioned
  double a[3][6];
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++) {
      a[i][j] = m[i][j];
      a[i][j + 3] = i == j ? 1.0 : 0.0;
    }
  for (int col = 0; col < 3; col++) {
    int piv = col;
    for (int r = col + 1; r < 3; r++)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (std::fabs(a[piv][col]) < 1e-300) fail(Errc::numeric, "singular 3x3 matrix");
    if (piv != col)
      for (int j = 0; j < 6; j++) std::swap(a[piv][j], a[col][j]);
    double d = a[col][col];
    for (int j = 0; j < 6; j++) a[col][j] /= d;
    for (int r = 0; r < 3; r++) {
      if (r == col) continue;
      double f = a[r][col];
      for (int j = 0; j < 6; j++) a[r][j] -= f * a[col][j];
    }
  }
  Matrix3 out;
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++) out.m[i][j] = a[i][j + 3];
  return out;
}

std::array<double, 3> Matrix3::apply(const std::array<double, 3>& v) const {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
          m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

double Matrix3::max_abs_diff(const Matrix3& o) const {
  double d = 0.0;
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++) d = std::max(d, std::fabs(m[i][j] - o.m[i][j]));
  return d;
}

Matrix3 rgb_to_xyz_matrix(ColorSpace s) {
  if (s == ColorSpace::xyz) return Matrix3::identity();
  Primaries p = primaries_of(s);
  auto xr = xyz_of(p.r), xg = xyz_of(p.g), xb = xyz_of(p.b), xw = xyz_of(p.w);
  Matrix3 P;
  for (int i = 0; i < 3; i++) {
    P.m[i][0] = xr[i];
    P.m[i][1] = xg[i];
    P.m[i][2] = xb[i];
  }
  auto scale = P.inverse().apply(xw);
  for (int i = 0; i < 3; i++) {
    P.m[i][0] *= scale[0];
    P.m[i][1] *= scale[1];
    P.m[i][2] *= scale[2];
  }
  return P;
}

Matrix3 gamut_matrix(ColorSpace src, ColorSpace dst) {
  if (src == dst) return Matrix3::identity();
  Matrix3 to_xyz = rgb_to_xyz_matrix(src);
  if (dst == ColorSpace::xyz) return to_xyz;
  Matrix3 from_xyz = rgb_to_xyz_matrix(dst).inverse();
  if (src == ColorSpace::xyz) return from_xyz;
  return from_xyz.mul(to_xyz);
}

std::array<double, 3> luma_weights(ColorSpace s) {
  if (s == ColorSpace::xyz) fail(Errc::invalid_argument, "no luma weights for XYZ");
  Matrix3 m = rgb_to_xyz_matrix(s);
  return {m.m[1][0], m.m[1][1], m.m[1][2]};
}

// ---------------------------------------------------------------------------

void hable_tonemap(ColorImage& img, const ToneCurveParams& tc, int threads) {
  if (img.domain != Domain::linear)
    fail(Errc::invalid_argument, "hable_tonemap expects a linear-domain image");
  if (!(tc.white > 0.0)) fail(Errc::invalid_argument, "tone curve white must be > 0");
  double hw = tc.curve(tc.white);
  std::atomic<int> bad{0};
  for (int c = 0; c < 3; c++) {
    double* p = img.plane(c);
    for_rows(img.h, threads, [&](int y) {
      double* row = p + std::size_t(y) * img.w;
      for (int x = 0; x < img.w; x++) {
        double v = row[x];
        if (std::isnan(v) || v < 0.0) {
          bad.store(1, std::memory_order_relaxed);
          continue;
        }
        double m = tc.curve(v) / hw;
        row[x] = m > 1.0 ? 1.0 : m;
      }
    });
  }
  if (bad.load()) fail(Errc::numeric, "hable_tonemap: NaN or negative input value");
}

void apply_matrix(ColorImage& img, const Matrix3& m, ColorSpace dst, int threads) {
  if (img.domain != Domain::linear)
    fail(Errc::invalid_argument, "apply_matrix expects a linear-domain image");
  double* r = img.plane(0);
  double* g = img.plane(1);
  double* b = img.plane(2);
  std::atomic<int> bad{0};
  for_rows(img.h, threads, [&](int y) {
    std::size_t o = std::size_t(y) * img.w;
    for (int x = 0; x < img.w; x++) {
      double vr = r[o + x], vg = g[o + x], vb = b[o + x];
      if (std::isnan(vr) || std::isnan(vg) || std::isnan(vb)) {
        bad.store(1, std::memory_order_relaxed);
        continue;
      }
      r[o + x] = m.m[0][0] * vr + m.m[0][1] * vg + m.m[0][2] * vb;
      g[o + x] = m.m[1][0] * vr + m.m[1][1] * vg + m.m[1][2] * vb;
      b[o + x] = m.m[2][0] * vr + m.m[2][1] * vg + m.m[2][2] * vb;
    }
  });
  if (bad.load()) nan_error("apply_matrix");
  img.space = dst;
}

void oetf_image(ColorImage& img, Transfer t, int threads) {
  if (img.domain != Domain::linear)
    fail(Errc::invalid_argument, "oetf_image expects a linear-domain image");
  std::atomic<std::uint64_t> clamped_lo{0}, clamped_hi{0};
  std::atomic<int> bad{0};
  for (int c = 0; c < 3; c++) {
    double* p = img.plane(c);
    for_rows(img.h, threads, [&](int y) {
      double* row = p + std::size_t(y) * img.w;
      std::uint64_t lo = 0, hi = 0;
      for (int x = 0; x < img.w; x++) {
        double v = row[x];
        if (std::isnan(v)) {
          bad.store(1, std::memory_order_relaxed);
          continue;
        }
        if (v < 0.0) {
          v = 0.0;
          lo++;
        } else if (v > 1.0) {
          v = 1.0;
          hi++;
        }
        row[x] = transfer_oetf(t, v);
      }
      if (lo) clamped_lo.fetch_add(lo, std::memory_order_relaxed);
      if (hi) clamped_hi.fetch_add(hi, std::memory_order_relaxed);
    });
  }
  if (bad.load()) nan_error("oetf_image");
  warnings().oetf_clamped_low += clamped_lo.load();
  warnings().oetf_clamped_high += clamped_hi.load();
  img.domain = Domain::encoded;
}

void eotf_image(ColorImage& img, Transfer t, int threads) {
  if (img.domain != Domain::encoded)
    fail(Errc::invalid_argument, "eotf_image expects an encoded-domain image");
  std::atomic<int> bad{0};
  for (int c = 0; c < 3; c++) {
    double* p = img.plane(c);
    for_rows(img.h, threads, [&](int y) {
      double* row = p + std::size_t(y) * img.w;
      for (int x = 0; x < img.w; x++) {
        if (std::isnan(row[x])) {
          bad.store(1, std::memory_order_relaxed);
          continue;
        }
        row[x] = transfer_eotf(t, row[x]);
      }
    });
  }
  if (bad.load()) nan_error("eotf_image");
  img.domain = Domain::linear;
}

void quantize_image(ColorImage& img, const QuantSpec& q, int threads) {
  if (img.domain != Domain::encoded)
    fail(Errc::invalid_argument, "quantize_image expects an encoded-domain image");
  std::atomic<int> bad{0};
  for (int c = 0; c < 3; c++) {
    double* p = img.plane(c);
    for_rows(img.h, threads, [&](int y) {
      double* row = p + std::size_t(y) * img.w;
      for (int x = 0; x < img.w; x++) {
        if (std::isnan(row[x])) {
          bad.store(1, std::memory_order_relaxed);
          continue;
        }
        row[x] = quantize_value(row[x], q.bits);
      }
    });
  }
  if (bad.load()) nan_error("quantize_image");
}

void scale_image(ColorImage& img, double k, int threads) {
  std::atomic<int> bad{0};
  for (int c = 0; c < 3; c++) {
    double* p = img.plane(c);
    for_rows(img.h, threads, [&](int y) {
      double* row = p + std::size_t(y) * img.w;
      for (int x = 0; x < img.w; x++) {
        if (std::isnan(row[x])) {
          bad.store(1, std::memory_order_relaxed);
          continue;
        }
        row[x] *= k;
      }
    });
  }
  if (bad.load()) nan_error("scale_image");
}

}  // namespace hdrtv
