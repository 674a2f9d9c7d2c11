#include "hdrtv/data_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "hdrtv/error.hpp"

namespace hdrtv {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports fatal problems through longjmp; keep all C++ objects with
// destructors outside the setjmp scope.
struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};
struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

}  // namespace

ColorImage load_png(const std::string& path, int expect_bits, ColorSpace space,
                    Domain domain, int grid_bits) {
  if (expect_bits != 8 && expect_bits != 16)
    fail(Errc::invalid_argument, "load_png: expected bit depth must be 8 or 16");
  if (grid_bits != 0 && grid_bits != 10)
    fail(Errc::invalid_argument, "load_png: grid_bits must be 0 or 10");

  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(Errc::io, "cannot open " + path);

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
    fail(Errc::io, path + " is not a PNG file");

  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) fail(Errc::io, "png_create_read_struct failed");
  r.info = png_create_info_struct(r.png);
  if (!r.info) fail(Errc::io, "png_create_info_struct failed");

  int width = 0, height = 0, bit_depth = 0, color_type = 0;
  std::vector<unsigned char> raw;
  std::vector<png_bytep> rows;
  volatile bool dropped_alpha = false;  // set across the setjmp scope

  if (setjmp(png_jmpbuf(r.png))) fail(Errc::io, path + ": truncated or corrupt PNG");

  png_init_io(r.png, fp.get());
  png_set_sig_bytes(r.png, 8);
  png_read_info(r.png, r.info);

  width = png_get_image_width(r.png, r.info);
  height = png_get_image_height(r.png, r.info);
  bit_depth = png_get_bit_depth(r.png, r.info);
  color_type = png_get_color_type(r.png, r.info);

  if (color_type != PNG_COLOR_TYPE_RGB && color_type != PNG_COLOR_TYPE_RGB_ALPHA)
    fail(Errc::io, path + ": only RGB and RGBA PNGs are supported");
  if (bit_depth != expect_bits)
    fail(Errc::io, path + ": expected " + std::to_string(expect_bits) + "-bit, file is " +
                       std::to_string(bit_depth) + "-bit");

  if (color_type == PNG_COLOR_TYPE_RGB_ALPHA) {
    png_set_strip_alpha(r.png);
    dropped_alpha = true;
  }
  if (bit_depth == 16) png_set_swap(r.png);  // PNG stores 16-bit big-endian
  png_set_interlace_handling(r.png);
  png_read_update_info(r.png, r.info);

  std::size_t stride = std::size_t(width) * 3 * (bit_depth / 8);
  raw.assign(stride * height, 0);
  rows.resize(height);
  for (int y = 0; y < height; y++) rows[y] = raw.data() + std::size_t(y) * stride;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);

  if (dropped_alpha) warnings().alpha_dropped++;

  ColorImage img(width, height, space, domain);
  double denom = double((1u << expect_bits) - 1);
  for (int y = 0; y < height; y++) {
    for (int x = 0; x < width; x++) {
      for (int c = 0; c < 3; c++) {
        double v;
        if (expect_bits == 8) {
          v = raw[std::size_t(y) * stride + std::size_t(x) * 3 + c] / denom;
        } else {
          const unsigned char* q = raw.data() + std::size_t(y) * stride + (std::size_t(x) * 3 + c) * 2;
          std::uint16_t code;
          std::memcpy(&code, q, 2);
          v = code / denom;
        }
        if (grid_bits == 10) v = std::floor(v * 1023.0 + 0.5) / 1023.0;
        img.at(c, y, x) = v;
      }
    }
  }
  return img;
}

void save_png(const std::string& path, const ColorImage& img, int bits) {
  if (bits != 8 && bits != 16) fail(Errc::invalid_argument, "save_png: bits must be 8 or 16");
  if (img.w <= 0 || img.h <= 0) fail(Errc::invalid_argument, "save_png: empty image");

  // stage interleaved codes before touching libpng
  std::size_t stride = std::size_t(img.w) * 3 * (bits / 8);
  std::vector<unsigned char> raw(stride * img.h);
  double levels = double((1u << bits) - 1);
  for (int y = 0; y < img.h; y++) {
    for (int x = 0; x < img.w; x++) {
      for (int c = 0; c < 3; c++) {
        double v = img.at(c, y, x);
        if (std::isnan(v)) fail(Errc::numeric, "save_png: NaN pixel value");
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        std::uint32_t code = std::uint32_t(std::lround(v * levels));
        if (bits == 8) {
          raw[std::size_t(y) * stride + std::size_t(x) * 3 + c] = (unsigned char)code;
        } else {
          std::uint16_t c16 = (std::uint16_t)code;
          std::memcpy(raw.data() + std::size_t(y) * stride + (std::size_t(x) * 3 + c) * 2, &c16, 2);
        }
      }
    }
  }

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail(Errc::io, "cannot open " + path + " for writing");

  PngWriter w;
  w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!w.png) fail(Errc::io, "png_create_write_struct failed");
  w.info = png_create_info_struct(w.png);
  if (!w.info) fail(Errc::io, "png_create_info_struct failed");

  std::vector<png_bytep> rows(img.h);
  for (int y = 0; y < img.h; y++) rows[y] = raw.data() + std::size_t(y) * stride;

  if (setjmp(png_jmpbuf(w.png))) fail(Errc::io, path + ": PNG write failed");

  png_init_io(w.png, fp.get());
  png_set_IHDR(w.png, w.info, img.w, img.h, bits, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  if (bits == 16) png_set_swap(w.png);
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

std::vector<ColorImage> crop_patches(const ColorImage& img, int size, int step) {
  if (size <= 0 || step <= 0) fail(Errc::invalid_argument, "crop_patches: size and step must be > 0");
  if (size > img.w || size > img.h)
    fail(Errc::invalid_argument, "crop_patches: patch size exceeds image dims");
  int nx = (img.w - size) / step + 1;
  int ny = (img.h - size) / step + 1;
  std::vector<ColorImage> out;
  out.reserve(std::size_t(nx) * ny);
  for (int py = 0; py < ny; py++) {
    for (int px = 0; px < nx; px++) {
      ColorImage p(size, size, img.space, img.domain);
      int ox = px * step, oy = py * step;
      for (int c = 0; c < 3; c++)
        for (int y = 0; y < size; y++)
          for (int x = 0; x < size; x++) p.at(c, y, x) = img.at(c, oy + y, ox + x);
      out.push_back(std::move(p));
    }
  }
  return out;
}

ColorImage downsample_box(const ColorImage& img, int factor) {
  if (factor <= 0) fail(Errc::invalid_argument, "downsample_box: factor must be > 0");
  int ow = (img.w + factor - 1) / factor;
  int oh = (img.h + factor - 1) / factor;
  ColorImage out(ow, oh, img.space, img.domain);
  for (int c = 0; c < 3; c++) {
    for (int oy = 0; oy < oh; oy++) {
      int y0 = oy * factor, y1 = std::min(img.h, y0 + factor);
      for (int ox = 0; ox < ow; ox++) {
        int x0 = ox * factor, x1 = std::min(img.w, x0 + factor);
        double s = 0.0;
        for (int y = y0; y < y1; y++)
          for (int x = x0; x < x1; x++) s += img.at(c, y, x);
        out.at(c, oy, ox) = s / (double(y1 - y0) * double(x1 - x0));
      }
    }
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open manifest " + path);
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    std::string trimmed = line;
    auto hash = trimmed.find('#');
    if (hash != std::string::npos) trimmed.erase(hash);
    std::istringstream ss(trimmed);
    std::string a, b, extra;
    if (!(ss >> a)) continue;  // blank or comment-only line
    if (!(ss >> b) || (ss >> extra))
      fail(Errc::io, path + ":" + std::to_string(lineno) + ": expected two paths per line");
    pairs.emplace_back(a, b);
  }
  return pairs;
}

void save_manifest(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::ofstream out(path);
  if (!out) fail(Errc::io, "cannot open " + path + " for writing");
  for (const auto& [a, b] : pairs) out << a << " " << b << "\n";
  if (!out) fail(Errc::io, "failed writing manifest " + path);
}

}  // namespace hdrtv
