#include <doctest.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hdrtv/lut.hpp"
#include "hdrtv/rng.hpp"
#include "hdrtv/train.hpp"

using namespace hdrtv;
namespace fs = std::filesystem;

namespace {

struct TmpDir {
  fs::path dir;
  TmpDir() {
    dir = fs::temp_directory_path() /
          ("hdrtv_lut_" + std::to_string(rng::hash({std::uint64_t(std::time(nullptr)),
                                                    std::uint64_t(::getpid())}) >>
                                         32));
    fs::create_directories(dir);
  }
  ~TmpDir() { fs::remove_all(dir); }
  std::string operator/(const char* name) const { return (dir / name).string(); }
};

ColorImage noise_image(int w, int h, std::uint64_t seed) {
  ColorImage img(w, h, ColorSpace::rec709, Domain::encoded);
  for (int c = 0; c < 3; c++)
    for (int y = 0; y < h; y++)
      for (int x = 0; x < w; x++)
        img.at(c, y, x) = rng::uniform(seed, rng::bench, c, std::uint64_t(y) << 20 | x);
  return img;
}

Lut3d noise_lut(int n, std::uint64_t seed) {
  Lut3d lut;
  lut.n = n;
  lut.table.resize(std::size_t(n) * n * n * 3);
  for (std::size_t i = 0; i < lut.table.size(); i++)
    lut.table[i] = float(rng::uniform(seed, rng::bench, 99, i));
  return lut;
}

// Pointwise, curved, stays inside [0,1] on the unit cube.
void curved_map(double r, double g, double b, double* out) {
  out[0] = std::pow(0.6 * r + 0.3 * g + 0.1 * b, 2.0);
  out[1] = std::sqrt(0.2 * r + 0.7 * g + 0.1 * b);
  out[2] = 0.15 + 0.7 * (0.1 * r + 0.2 * g + 0.7 * b) * b;
}

BatchMap pointwise(void (*f)(double, double, double, double*)) {
  return [f](const ColorImage& in) {
    ColorImage out = in;
    const std::size_t npx = in.npx();
    for (std::size_t p = 0; p < npx; p++) {
      double v[3];
      f(in.px[p], in.px[npx + p], in.px[2 * npx + p], v);
      out.px[p] = v[0];
      out.px[npx + p] = v[1];
      out.px[2 * npx + p] = v[2];
    }
    return out;
  };
}

// Every node of the lattice as one pixel each, in table order.
ColorImage all_nodes(int n) {
  ColorImage img(n * n, n, ColorSpace::rec709, Domain::encoded);
  const std::size_t npx = img.npx();
  const double step = 1.0 / (n - 1);
  for (int b = 0; b < n; b++)
    for (int g = 0; g < n; g++)
      for (int r = 0; r < n; r++) {
        const std::size_t p = (std::size_t(b) * n + g) * n + r;
        img.px[p] = r * step;
        img.px[npx + p] = g * step;
        img.px[2 * npx + p] = b * step;
      }
  return img;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}

std::string import_error(const std::string& path) {
  try {
    import_cube(path);
  } catch (const Error& e) {
    CHECK(e.kind() == Errc::io);
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE_BEGIN("lut");

TEST_CASE("bake fills the table in red-fastest order") {
  auto lut = bake_lut([](const ColorImage& in) { return in; }, 5);
  REQUIRE(lut.n == 5);
  REQUIRE(lut.table.size() == 125 * 3);
  for (int b = 0; b < 5; b++)
    for (int g = 0; g < 5; g++)
      for (int r = 0; r < 5; r++) {
        const float* e = lut.entry(r, g, b);
        CHECK(e[0] == float(r / 4.0));
        CHECK(e[1] == float(g / 4.0));
        CHECK(e[2] == float(b / 4.0));
      }

  auto flat = bake_lut(
      [](const ColorImage& in) {
        ColorImage out = in;
        for (auto& v : out.px) v = 0.25;
        return out;
      },
      3);
  for (float v : flat.table) CHECK(v == 0.25f);
}

TEST_CASE("bake clamps outputs and names non-finite nodes") {
  auto big = bake_lut(
      [](const ColorImage& in) {
        ColorImage out = in;
        for (auto& v : out.px) v = v * 3.0 - 1.0;
        return out;
      },
      4);
  for (float v : big.table) {
    CHECK(v >= 0.f);
    CHECK(v <= 1.f);
  }

  // node (2,0,1) of a 5-lattice is pixel 1*25 + 0*5 + 2 in the packed image
  auto poison = [](const ColorImage& in) {
    ColorImage out = in;
    out.px[out.npx() + 27] = std::nan("");
    return out;
  };
  try {
    bake_lut(poison, 5);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == Errc::numeric);
    CHECK(std::string(e.what()).find("(2,0,1)") != std::string::npos);
  }
}

TEST_CASE("bake rejects bad sizes and broken mappings") {
  auto id = [](const ColorImage& in) { return in; };
  CHECK_THROWS_AS(bake_lut(id, 1), Error);
  CHECK_THROWS_AS(bake_lut(id, 257), Error);
  CHECK_THROWS_AS(bake_lut(BatchMap{}, 17), Error);
  CHECK_THROWS_AS(bake_lut([](const ColorImage&) { return ColorImage(4, 4, ColorSpace::rec709,
                                                                     Domain::encoded); },
                           5),
                  Error);
}

TEST_CASE("lattice inputs return stored entries") {
  // 16 and 32 interior steps are powers of two, so node coordinates and the
  // index arithmetic are exact and the interpolation weights collapse to 0/1.
  for (int n : {17, 33}) {
    auto lut = bake_lut(pointwise(curved_map), n);
    auto out = apply_lut(all_nodes(n), lut);
    const std::size_t npx = out.npx();
    for (std::size_t p = 0; p < npx; p++)
      for (int c = 0; c < 3; c++) CHECK(out.px[c * npx + p] == double(lut.table[p * 3 + c]));
  }
  // 63 steps round, which may push a weight to 1-ulp off a node
  auto lut = bake_lut(pointwise(curved_map), 64);
  auto out = apply_lut(all_nodes(64), lut);
  const std::size_t npx = out.npx();
  for (std::size_t p = 0; p < npx; p++)
    for (int c = 0; c < 3; c++)
      CHECK(std::abs(out.px[c * npx + p] - double(lut.table[p * 3 + c])) <= 1e-7);
}

TEST_CASE("interpolation matches a brute-force corner oracle") {
  auto lut = noise_lut(9, 31);
  const int n = 9;
  ColorImage img = noise_image(64, 3, 32);
  // exercise the faces too
  img.at(0, 0, 0) = 0.0;
  img.at(1, 0, 1) = 1.0;
  img.at(2, 0, 2) = 1.0;
  auto out = apply_lut(img, lut);

  const std::size_t npx = img.npx();
  for (std::size_t p = 0; p < npx; p++) {
    int i0[3];
    double f[3];
    for (int c = 0; c < 3; c++) {
      double t = img.px[c * npx + p] * (n - 1);
      int i = int(std::floor(t));
      if (i > n - 2) i = n - 2;
      i0[c] = i;
      f[c] = t - i;
    }
    for (int c = 0; c < 3; c++) {
      double acc = 0.0;
      for (int k = 0; k < 8; k++) {
        const int dr = k & 1, dg = (k >> 1) & 1, db = (k >> 2) & 1;
        const double w = (dr ? f[0] : 1.0 - f[0]) * (dg ? f[1] : 1.0 - f[1]) *
                         (db ? f[2] : 1.0 - f[2]);
        acc += w * lut.entry(i0[0] + dr, i0[1] + dg, i0[2] + db)[c];
      }
      CHECK(std::abs(out.px[c * npx + p] - acc) <= 1e-12);
    }
  }
}

TEST_CASE("affine mappings are reproduced everywhere") {
  // trilinear interpolation is exact on functions linear in each channel
  auto affine = [](const ColorImage& in) {
    ColorImage out = in;
    const std::size_t npx = in.npx();
    for (std::size_t p = 0; p < npx; p++) {
      const double r = in.px[p], g = in.px[npx + p], b = in.px[2 * npx + p];
      out.px[p] = 0.05 + 0.55 * r + 0.20 * g + 0.10 * b;
      out.px[npx + p] = 0.10 + 0.30 * r + 0.40 * g + 0.15 * b;
      out.px[2 * npx + p] = 0.20 + 0.10 * r + 0.25 * g + 0.35 * b;
    }
    return out;
  };
  auto lut = bake_lut(affine, 9);
  ColorImage img = noise_image(128, 4, 77);
  img.at(0, 0, 0) = img.at(1, 0, 0) = img.at(2, 0, 0) = 0.0;
  img.at(0, 0, 1) = img.at(1, 0, 1) = img.at(2, 0, 1) = 1.0;
  auto got = apply_lut(img, lut);
  auto want = affine(img);
  for (std::size_t i = 0; i < got.px.size(); i++)
    CHECK(std::abs(got.px[i] - want.px[i]) <= 1e-6);
}

TEST_CASE("identity table is the identity within format precision") {
  auto lut = bake_lut([](const ColorImage& in) { return in; }, 17);
  ColorImage img = noise_image(96, 5, 41);
  auto out = apply_lut(img, lut);
  CHECK(out.space == ColorSpace::rec2020);
  CHECK(out.domain == Domain::encoded);
  for (std::size_t i = 0; i < img.px.size(); i++)
    CHECK(std::abs(out.px[i] - img.px[i]) <= 1e-6);
}

TEST_CASE("row-parallel apply is bitwise the serial apply") {
  auto lut = noise_lut(17, 51);
  ColorImage img = noise_image(160, 33, 52);
  auto serial = apply_lut(img, lut, 1);
  auto parallel = apply_lut(img, lut, 4);
  CHECK(std::memcmp(serial.px.data(), parallel.px.data(),
                    serial.px.size() * sizeof(double)) == 0);
}

TEST_CASE("finer lattices track a curved map strictly better") {
  ColorImage img = noise_image(64, 64, 63);
  auto direct = pointwise(curved_map)(img);
  double mae[3];
  int idx = 0;
  for (int n : {17, 33, 64}) {
    auto lut = bake_lut(pointwise(curved_map), n);
    auto got = apply_lut(img, lut);
    double acc = 0.0;
    for (std::size_t i = 0; i < got.px.size(); i++) acc += std::abs(got.px[i] - direct.px[i]);
    mae[idx++] = acc / double(got.px.size());
  }
  CHECK(mae[0] > mae[1]);
  CHECK(mae[1] > mae[2]);
}

TEST_CASE("out-of-domain inputs clamp to the faces") {
  auto lut = noise_lut(5, 71);
  ColorImage img(3, 1, ColorSpace::rec709, Domain::encoded);
  img.at(0, 0, 0) = -0.25;
  img.at(1, 0, 0) = 0.5;
  img.at(2, 0, 0) = 1.5;
  img.at(0, 0, 1) = -3.0;
  img.at(1, 0, 1) = -3.0;
  img.at(2, 0, 1) = -3.0;
  img.at(0, 0, 2) = 2.0;
  img.at(1, 0, 2) = 2.0;
  img.at(2, 0, 2) = 2.0;
  ColorImage inside = img;
  inside.at(0, 0, 0) = 0.0;
  inside.at(2, 0, 0) = 1.0;
  auto a = apply_lut(img, lut);
  auto b = apply_lut(inside, lut);
  for (int c = 0; c < 3; c++) {
    CHECK(a.at(c, 0, 0) == b.at(c, 0, 0));
    CHECK(a.at(c, 0, 1) == double(lut.entry(0, 0, 0)[c]));
    CHECK(a.at(c, 0, 2) == double(lut.entry(4, 4, 4)[c]));
  }
}

TEST_CASE("apply validates the table shape") {
  Lut3d bad;
  bad.n = 5;
  bad.table.resize(17);
  ColorImage img = noise_image(4, 4, 3);
  CHECK_THROWS_AS(apply_lut(img, bad), Error);
  bad.table.assign(125 * 3, 0.f);
  bad.domain_max = {0.f, 1.f, 1.f};  // empty on red
  CHECK_THROWS_AS(apply_lut(img, bad), Error);
}

TEST_CASE("cube files round trip at six decimals") {
  TmpDir tmp;
  auto lut = noise_lut(17, 81);
  export_cube(lut, tmp / "a.cube");
  auto back = import_cube(tmp / "a.cube");
  REQUIRE(back.n == 17);
  for (std::size_t i = 0; i < lut.table.size(); i++)
    CHECK(std::abs(back.table[i] - lut.table[i]) <= 1e-6f);
  CHECK(back.domain_min == std::array<float, 3>{0.f, 0.f, 0.f});
  CHECK(back.domain_max == std::array<float, 3>{1.f, 1.f, 1.f});
  // default domain stays implicit in the file
  CHECK(slurp(tmp / "a.cube").find("DOMAIN") == std::string::npos);

  Lut3d odd = noise_lut(5, 82);
  odd.domain_min = {0.1f, 0.2f, 0.0f};
  odd.domain_max = {0.9f, 1.0f, 0.8f};
  for (std::size_t p = 0; p < odd.table.size() / 3; p++)
    for (int c = 0; c < 3; c++)
      odd.table[p * 3 + c] =
          odd.domain_min[c] + odd.table[p * 3 + c] * (odd.domain_max[c] - odd.domain_min[c]);
  export_cube(odd, tmp / "b.cube");
  auto odd2 = import_cube(tmp / "b.cube");
  for (int c = 0; c < 3; c++) {
    CHECK(std::abs(odd2.domain_min[c] - odd.domain_min[c]) <= 1e-6f);
    CHECK(std::abs(odd2.domain_max[c] - odd.domain_max[c]) <= 1e-6f);
  }
  for (std::size_t i = 0; i < odd.table.size(); i++)
    CHECK(std::abs(odd2.table[i] - odd.table[i]) <= 1e-6f);
}

TEST_CASE("a 33-lattice export carries exactly 35937 data lines") {
  TmpDir tmp;
  export_cube(noise_lut(33, 91), tmp / "s33.cube");
  std::ifstream f(tmp / "s33.cube");
  std::string line;
  long data = 0, other = 0;
  while (std::getline(f, line)) {
    if (!line.empty() && std::isdigit(static_cast<unsigned char>(line[0])))
      data++;
    else
      other++;
  }
  CHECK(data == 35937);
  CHECK(other == 1);  // the size header
}

TEST_CASE("a hand-written two-node file parses into its eight entries") {
  TmpDir tmp;
  spit(tmp / "hand.cube",
       "# written by hand\n"
       "TITLE \"tiny\"\n"
       "\n"
       "LUT_3D_SIZE 2\n"
       "DOMAIN_MIN 0.000000 0.000000 0.000000\n"
       "DOMAIN_MAX 1.000000 1.000000 1.000000\n"
       "0.000000 0.000000 0.000000\n"
       "0.950000 0.050000 0.100000\n"
       "0.050000 0.900000 0.150000\n"
       "0.975000 0.925000 0.200000\n"
       "0.100000 0.150000 0.850000\n"
       "0.925000 0.250000 0.875000\n"
       "0.150000 0.825000 0.900000\n"
       "1.000000 1.000000 1.000000\n");
  auto lut = import_cube(tmp / "hand.cube");
  REQUIRE(lut.n == 2);
  const float want[8][3] = {{0.f, 0.f, 0.f},          {0.95f, 0.05f, 0.1f},
                            {0.05f, 0.9f, 0.15f},     {0.975f, 0.925f, 0.2f},
                            {0.1f, 0.15f, 0.85f},     {0.925f, 0.25f, 0.875f},
                            {0.15f, 0.825f, 0.9f},    {1.f, 1.f, 1.f}};
  int p = 0;
  for (int b = 0; b < 2; b++)
    for (int g = 0; g < 2; g++)
      for (int r = 0; r < 2; r++, p++)
        for (int c = 0; c < 3; c++) CHECK(lut.entry(r, g, b)[c] == want[p][c]);

  // the parsed corners drive interpolation like any baked table
  ColorImage mid(1, 1, ColorSpace::rec709, Domain::encoded);
  mid.at(0, 0, 0) = mid.at(1, 0, 0) = mid.at(2, 0, 0) = 0.5;
  auto out = apply_lut(mid, lut);
  for (int c = 0; c < 3; c++) {
    double acc = 0.0;
    for (int k = 0; k < 8; k++) acc += 0.125 * want[k][c];
    CHECK(out.at(c, 0, 0) == doctest::Approx(acc).epsilon(1e-12));
  }
}

TEST_CASE("malformed cube files name the offending line") {
  TmpDir tmp;
  auto write_and_probe = [&](const char* text) {
    spit(tmp / "bad.cube", text);
    return import_error(tmp / "bad.cube");
  };

  auto msg = write_and_probe("LUT_3D_SIZE 2\nBOGUS_KEY 1\n");
  CHECK(msg.find(":2:") != std::string::npos);
  CHECK(msg.find("unknown keyword") != std::string::npos);

  msg = write_and_probe("0.1 0.2 0.3\n");
  CHECK(msg.find(":1:") != std::string::npos);
  CHECK(msg.find("before LUT_3D_SIZE") != std::string::npos);

  msg = write_and_probe("LUT_3D_SIZE 2\n0.0 0.0 0.0\n");
  CHECK(msg.find("expected 8 data lines, found 1") != std::string::npos);

  msg = write_and_probe(
      "LUT_3D_SIZE 2\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n");
  CHECK(msg.find(":10:") != std::string::npos);
  CHECK(msg.find("extra data line") != std::string::npos);

  msg = write_and_probe("LUT_3D_SIZE 2\n0.0 zebra 0.0\n");
  CHECK(msg.find(":2:") != std::string::npos);
  CHECK(msg.find("needs 3 numbers") != std::string::npos);

  msg = write_and_probe("LUT_3D_SIZE 2\n0.0 0.0 0.0 0.0\n");
  CHECK(msg.find("trailing token") != std::string::npos);

  msg = write_and_probe("LUT_1D_SIZE 4096\n");
  CHECK(msg.find("not supported") != std::string::npos);

  msg = write_and_probe("LUT_3D_SIZE 300\n");
  CHECK(msg.find("out of range") != std::string::npos);

  msg = write_and_probe("LUT_3D_SIZE 2\nLUT_3D_SIZE 3\n");
  CHECK(msg.find("duplicate") != std::string::npos);

  msg = write_and_probe("LUT_3D_SIZE 2\n0 0 0\nDOMAIN_MIN 0 0 0\n");
  CHECK(msg.find("after data began") != std::string::npos);

  CHECK_THROWS_AS(import_cube(tmp / "missing.cube"), Error);
}

TEST_CASE("manifold csv pairs inputs with outputs in table order") {
  TmpDir tmp;
  auto lut = bake_lut([](const ColorImage& in) { return in; }, 5);
  manifold_export_csv(lut, tmp / "m.csv");
  std::ifstream f(tmp / "m.csv");
  std::string line;
  int rows = 0;
  double prev_r = -1.0;
  while (std::getline(f, line)) {
    double v[6];
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2], &v[3],
                        &v[4], &v[5]) == 6);
    for (int c = 0; c < 3; c++) CHECK(std::abs(v[c] - v[c + 3]) <= 1e-6);
    if (rows < 5) {
      // red varies fastest within the first slice
      CHECK(v[0] > prev_r);
      CHECK(v[1] == 0.0);
      CHECK(v[2] == 0.0);
      prev_r = v[0];
    }
    rows++;
  }
  CHECK(rows == 125);
}

TEST_CASE("manifold ply is one colored vertex per node") {
  TmpDir tmp;
  auto lut = bake_lut(pointwise(curved_map), 5);
  manifold_export_ply(lut, tmp / "m.ply");
  std::ifstream f(tmp / "m.ply");
  std::string line;
  std::getline(f, line);
  CHECK(line == "ply");
  int header = 1, body = 0;
  bool in_header = true;
  while (std::getline(f, line)) {
    if (in_header) {
      header++;
      if (line == "element vertex 125") CHECK(true);
      if (line == "end_header") in_header = false;
      continue;
    }
    double x, y, z;
    int r, g, b;
    REQUIRE(std::sscanf(line.c_str(), "%lf %lf %lf %d %d %d", &x, &y, &z, &r, &g, &b) == 6);
    CHECK(r >= 0);
    CHECK(r <= 255);
    body++;
  }
  CHECK(header == 10);
  CHECK(body == 125);
}

TEST_CASE("two condition frames bend a trained mapper's table apart") {
  // sources must be >= 128 on a side: the condition input is the frame
  // downsampled by 4, and four pooling blocks turn anything smaller into a
  // 1x1 map whose instance norm is identically zero, which pins the
  // condition vector to a constant no matter what the frame holds
  auto ds = benchmark_set(6, 128, 128, 404);
  TrainConfig cfg;
  cfg.iters = 160;
  cfg.batch = 2;
  cfg.patch = 32;
  cfg.val_every = 80;
  cfg.log_every = 1000;
  cfg.seed = 11;
  auto m = Agcm<float>::make(5);
  train_agcm(m, ds, cfg);

  auto bake_with = [&](const ColorImage& cond) {
    return bake_lut([&](const ColorImage& im) { return agcm_infer_frozen(m, im, cond); }, 5);
  };
  auto la = bake_with(ds.in[0]);
  auto lb = bake_with(ds.in[1]);
  auto la2 = bake_with(ds.in[0]);
  CHECK(std::memcmp(la.table.data(), la2.table.data(), la.table.size() * sizeof(float)) == 0);

  float diff = 0.f;
  for (std::size_t i = 0; i < la.table.size(); i++)
    diff = std::max(diff, std::abs(la.table[i] - lb.table[i]));
  CHECK(diff > 0.f);
}

TEST_SUITE_END();
