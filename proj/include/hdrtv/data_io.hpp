#pragma once
#include <string>
#include <utility>
#include <vector>

#include "hdrtv/color_image.hpp"

namespace hdrtv {

// PNG I/O. Values map to codes as v = code / (2^bits - 1). 10-bit material is
// stored in 16-bit files with code16 = round(k * 65535 / 1023) for a 10-bit
// code k; loading with grid_bits = 10 snaps values back onto the 1023 grid.
// RGBA inputs have alpha dropped (counted in warnings()); other layouts error.
ColorImage load_png(const std::string& path, int expect_bits, ColorSpace space,
                    Domain domain, int grid_bits = 0);
void save_png(const std::string& path, const ColorImage& img, int bits);

// Sliding-window crops, row-major over positions.
// Count per axis is floor((dim - size)/step) + 1.
std::vector<ColorImage> crop_patches(const ColorImage& img, int size, int step);

// Non-overlapping factor x factor box means; edge boxes average what they cover.
ColorImage downsample_box(const ColorImage& img, int factor);

// Pair manifest: one "sdr_path hdr_path" line per pair, '#' comments allowed.
std::vector<std::pair<std::string, std::string>> load_manifest(const std::string& path);
void save_manifest(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& pairs);

}  // namespace hdrtv
