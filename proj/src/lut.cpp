#include "hdrtv/lut.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hdrtv/error.hpp"

namespace hdrtv {

namespace {

// .cube sizes; 2 is the format's floor, 256 a sanity cap far above use.
constexpr int kMinSize = 2;
constexpr int kMaxSize = 256;

void check_size(int n) {
  if (n < kMinSize || n > kMaxSize)
    fail(Errc::invalid_argument, "lut size must be in [2,256], got " + std::to_string(n));
}

void check_shape(const Lut3d& lut) {
  check_size(lut.n);
  const std::size_t want = std::size_t(lut.n) * lut.n * lut.n * 3;
  if (lut.table.size() != want)
    fail(Errc::invalid_argument, "lut table holds " + std::to_string(lut.table.size()) +
                                     " floats, size " + std::to_string(lut.n) + " needs " +
                                     std::to_string(want));
  for (int c = 0; c < 3; c++)
    if (!(lut.domain_min[c] < lut.domain_max[c]))
      fail(Errc::invalid_argument, "lut domain is empty on a channel");
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

}  // namespace

Lut3d bake_lut(const BatchMap& map, int n) {
  check_size(n);
  if (!map) fail(Errc::invalid_argument, "bake needs a mapping");

  // One row per blue slice: pixel (b*n*n + g*n + r) is node (r,g,b), so the
  // packed image and the table share their linear order.
  ColorImage lattice(n * n, n, ColorSpace::rec709, Domain::encoded);
  const double step = 1.0 / (n - 1);
  const std::size_t npx = lattice.npx();
  for (int b = 0; b < n; b++)
    for (int g = 0; g < n; g++)
      for (int r = 0; r < n; r++) {
        const std::size_t p = (std::size_t(b) * n + g) * n + r;
        lattice.px[p] = r * step;
        lattice.px[npx + p] = g * step;
        lattice.px[2 * npx + p] = b * step;
      }

  ColorImage out = map(lattice);
  if (out.w != lattice.w || out.h != lattice.h)
    fail(Errc::invalid_argument, "mapping changed the image size");

  Lut3d lut;
  lut.n = n;
  lut.table.resize(npx * 3);
  const std::size_t onpx = out.npx();
  for (std::size_t p = 0; p < npx; p++) {
    for (int c = 0; c < 3; c++) {
      const double v = out.px[std::size_t(c) * onpx + p];
      if (!std::isfinite(v)) {
        const int r = int(p % n), g = int((p / n) % n), b = int(p / (std::size_t(n) * n));
        fail(Errc::numeric, "mapping returned a non-finite value at node (" +
                                std::to_string(r) + "," + std::to_string(g) + "," +
                                std::to_string(b) + ")");
      }
      lut.table[p * 3 + c] = float(std::clamp(v, 0.0, 1.0));
    }
  }
  return lut;
}

ColorImage apply_lut(const ColorImage& img, const Lut3d& lut, int threads) {
  check_shape(lut);
  ColorImage out(img.w, img.h, ColorSpace::rec2020, Domain::encoded);

  const int n = lut.n;
  const double hi = n - 1;
  double dmin[3], scale[3];
  for (int c = 0; c < 3; c++) {
    dmin[c] = lut.domain_min[c];
    scale[c] = hi / (double(lut.domain_max[c]) - lut.domain_min[c]);
  }
  const float* tab = lut.table.data();
  const std::size_t sg = std::size_t(n) * 3;   // stride to the next green node
  const std::size_t sb = std::size_t(n) * sg;  // stride to the next blue node
  const std::size_t npx = img.npx();
  const double* pr = img.px.data();
  const double* pg = pr + npx;
  const double* pb = pg + npx;
  double* outp = out.px.data();

  for_rows(img.h, threads, [&](int y) {
    const std::size_t row = std::size_t(y) * img.w;
    for (int x = 0; x < img.w; x++) {
      const std::size_t p = row + x;
      double t[3] = {(pr[p] - dmin[0]) * scale[0], (pg[p] - dmin[1]) * scale[1],
                     (pb[p] - dmin[2]) * scale[2]};
      int i0[3];
      double f[3];
      for (int c = 0; c < 3; c++) {
        // Comparison order sends NaN to 0 rather than into int(NaN).
        double tc = t[c] > 0.0 ? (t[c] < hi ? t[c] : hi) : 0.0;
        int i = int(tc);
        if (i > n - 2) i = n - 2;
        i0[c] = i;
        f[c] = tc - i;
      }
      const double wr1 = f[0], wr0 = 1.0 - wr1;
      const double wg1 = f[1], wg0 = 1.0 - wg1;
      const double wb1 = f[2], wb0 = 1.0 - wb1;
      const float* p000 = tab + (std::size_t(i0[2]) * n + i0[1]) * sg + std::size_t(i0[0]) * 3;
      const float* p001 = p000 + sb;
      for (int c = 0; c < 3; c++) {
        const double lo = wg0 * (wr0 * p000[c] + wr1 * p000[3 + c]) +
                          wg1 * (wr0 * p000[sg + c] + wr1 * p000[sg + 3 + c]);
        const double hi2 = wg0 * (wr0 * p001[c] + wr1 * p001[3 + c]) +
                           wg1 * (wr0 * p001[sg + c] + wr1 * p001[sg + 3 + c]);
        outp[std::size_t(c) * npx + p] = wb0 * lo + wb1 * hi2;
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// .cube text format.

void export_cube(const Lut3d& lut, const std::string& path) {
  check_shape(lut);
  for (float v : lut.table)
    if (!std::isfinite(v)) fail(Errc::numeric, "lut holds a non-finite entry");

  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) fail(Errc::io, "cannot write " + path);
  std::fprintf(f, "LUT_3D_SIZE %d\n", lut.n);
  const bool unit = lut.domain_min == std::array<float, 3>{0.f, 0.f, 0.f} &&
                    lut.domain_max == std::array<float, 3>{1.f, 1.f, 1.f};
  if (!unit) {
    std::fprintf(f, "DOMAIN_MIN %.6f %.6f %.6f\n", lut.domain_min[0], lut.domain_min[1],
                 lut.domain_min[2]);
    std::fprintf(f, "DOMAIN_MAX %.6f %.6f %.6f\n", lut.domain_max[0], lut.domain_max[1],
                 lut.domain_max[2]);
  }
  const std::size_t rows = lut.table.size() / 3;
  for (std::size_t p = 0; p < rows; p++)
    std::fprintf(f, "%.6f %.6f %.6f\n", lut.table[p * 3], lut.table[p * 3 + 1],
                 lut.table[p * 3 + 2]);
  if (std::fclose(f) != 0) fail(Errc::io, "write failed on " + path);
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what) {
  fail(Errc::io, path + ":" + std::to_string(line) + ": " + what);
}

// Reads exactly three finite numbers from `rest`; anything else errors.
std::array<double, 3> parse_triple(const std::string& path, int line, std::istringstream& rest,
                                   const char* what) {
  std::array<double, 3> v{};
  for (int c = 0; c < 3; c++) {
    if (!(rest >> v[c])) parse_fail(path, line, std::string(what) + " needs 3 numbers");
    if (!std::isfinite(v[c])) parse_fail(path, line, "non-finite value");
  }
  std::string tail;
  if (rest >> tail) parse_fail(path, line, "trailing token '" + tail + "'");
  return v;
}

}  // namespace

Lut3d import_cube(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(Errc::io, "cannot read " + path);

  Lut3d lut;
  std::size_t want = 0, got = 0;
  std::string raw;
  int line = 0;
  while (std::getline(f, raw)) {
    line++;
    std::istringstream ls(raw);
    std::string head;
    if (!(ls >> head) || head[0] == '#') continue;

    if (std::isdigit(static_cast<unsigned char>(head[0])) || head[0] == '-' || head[0] == '.' ||
        head[0] == '+') {
      if (lut.n == 0) parse_fail(path, line, "data before LUT_3D_SIZE");
      if (got == want) parse_fail(path, line, "extra data line");
      std::istringstream whole(raw);
      auto v = parse_triple(path, line, whole, "a data line");
      for (int c = 0; c < 3; c++)
        lut.table[got * 3 + c] =
            std::clamp(float(v[c]), lut.domain_min[c], lut.domain_max[c]);
      got++;
    } else if (head == "LUT_3D_SIZE") {
      if (lut.n != 0) parse_fail(path, line, "duplicate LUT_3D_SIZE");
      int n = 0;
      std::string tail;
      if (!(ls >> n) || (ls >> tail)) parse_fail(path, line, "LUT_3D_SIZE needs one integer");
      if (n < kMinSize || n > kMaxSize) parse_fail(path, line, "size out of range [2,256]");
      lut.n = n;
      want = std::size_t(n) * n * n;
      lut.table.assign(want * 3, 0.f);
    } else if (head == "DOMAIN_MIN" || head == "DOMAIN_MAX") {
      if (got > 0) parse_fail(path, line, head + " after data began");
      auto v = parse_triple(path, line, ls, head.c_str());
      auto& dst = head == "DOMAIN_MIN" ? lut.domain_min : lut.domain_max;
      for (int c = 0; c < 3; c++) dst[c] = float(v[c]);
    } else if (head == "TITLE") {
      continue;  // cosmetic, some graders emit it
    } else if (head == "LUT_1D_SIZE") {
      parse_fail(path, line, "1D shaper tables are not supported");
    } else {
      parse_fail(path, line, "unknown keyword '" + head + "'");
    }
  }
  if (lut.n == 0) parse_fail(path, line, "no LUT_3D_SIZE header");
  if (got != want)
    parse_fail(path, line,
               "expected " + std::to_string(want) + " data lines, found " + std::to_string(got));
  check_shape(lut);
  return lut;
}

// ---------------------------------------------------------------------------
// Manifold point clouds.

void manifold_export_csv(const Lut3d& lut, const std::string& path) {
  check_shape(lut);
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) fail(Errc::io, "cannot write " + path);
  const int n = lut.n;
  const double step = 1.0 / (n - 1);
  for (int b = 0; b < n; b++)
    for (int g = 0; g < n; g++)
      for (int r = 0; r < n; r++) {
        const float* e = lut.entry(r, g, b);
        std::fprintf(f, "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r * step, g * step, b * step,
                     double(e[0]), double(e[1]), double(e[2]));
      }
  if (std::fclose(f) != 0) fail(Errc::io, "write failed on " + path);
}

void manifold_export_ply(const Lut3d& lut, const std::string& path) {
  check_shape(lut);
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) fail(Errc::io, "cannot write " + path);
  const int n = lut.n;
  const double step = 1.0 / (n - 1);
  std::fprintf(f,
               "ply\nformat ascii 1.0\nelement vertex %d\n"
               "property float x\nproperty float y\nproperty float z\n"
               "property uchar red\nproperty uchar green\nproperty uchar blue\n"
               "end_header\n",
               n * n * n);
  for (int b = 0; b < n; b++)
    for (int g = 0; g < n; g++)
      for (int r = 0; r < n; r++) {
        const float* e = lut.entry(r, g, b);
        std::fprintf(f, "%.6f %.6f %.6f %d %d %d\n", double(e[0]), double(e[1]), double(e[2]),
                     int(std::lround(r * step * 255)), int(std::lround(g * step * 255)),
                     int(std::lround(b * step * 255)));
      }
  if (std::fclose(f) != 0) fail(Errc::io, "write failed on " + path);
}

}  // namespace hdrtv
