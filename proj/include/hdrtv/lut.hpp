#pragma once
#include <array>
#include <functional>
#include <string>
#include <vector>

#include "hdrtv/color_image.hpp"

namespace hdrtv {

// 3D lookup table over the [0,1]^3 color cube. The table stores n^3 RGB
// triples with the red index varying fastest, the order .cube files use.
struct Lut3d {
  int n = 0;
  std::array<float, 3> domain_min{0.f, 0.f, 0.f};
  std::array<float, 3> domain_max{1.f, 1.f, 1.f};
  std::vector<float> table;  // n^3 * 3 floats

  std::size_t node(int r, int g, int b) const {
    return (std::size_t(b) * n + g) * std::size_t(n) + r;
  }
  const float* entry(int r, int g, int b) const { return table.data() + node(r, g, b) * 3; }
  float* entry(int r, int g, int b) { return table.data() + node(r, g, b) * 3; }
};

// A color mapping evaluated on a whole image at once. The bake packs all
// lattice nodes into one image so a network mapping pays graph setup once,
// not n^3 times.
using BatchMap = std::function<ColorImage(const ColorImage&)>;

// Samples the mapping at every node (i,j,k)/(n-1) of the encoded input cube.
// Outputs are clamped to [0,1]; a non-finite output fails naming the node.
Lut3d bake_lut(const BatchMap& map, int n);

// Per-pixel trilinear interpolation over the 8 surrounding nodes. Inputs
// outside the domain are clamped, never rejected. threads > 1 splits rows
// under OpenMP with results bitwise identical to the serial path. The output
// carries the wide-gamut encoded tags a mapper output carries; feeding
// other material is the caller's business, the arithmetic does not care.
ColorImage apply_lut(const ColorImage& img, const Lut3d& lut, int threads = 1);

// Text .cube interchange. Data lines hold three 6-decimal floats, red index
// fastest; DOMAIN_MIN/MAX appear only when not 0/1. import(export(x)) is
// within 1e-6 per entry, the precision of the format. Parse failures throw
// with the file name and line number.
void export_cube(const Lut3d& lut, const std::string& path);
Lut3d import_cube(const std::string& path);

// Point cloud of the mapping's geometry, one row per lattice node in table
// order. CSV rows are "r_in,g_in,b_in,r_out,g_out,b_out", no header. The PLY
// variant places each vertex at the mapped color and paints it with the
// input color, so an identity table renders as a regular colored lattice.
void manifold_export_csv(const Lut3d& lut, const std::string& path);
void manifold_export_ply(const Lut3d& lut, const std::string& path);

}  // namespace hdrtv
