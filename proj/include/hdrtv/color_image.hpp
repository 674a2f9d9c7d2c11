#pragma once
#include <cstddef>
#include <vector>

#include "hdrtv/error.hpp"

namespace hdrtv {

enum class ColorSpace { rec709, rec2020, xyz };
enum class Domain { linear, encoded };
enum class Transfer { gamma22, pq };

inline const char* to_string(ColorSpace s) {
  switch (s) {
    case ColorSpace::rec709: return "rec709";
    case ColorSpace::rec2020: return "rec2020";
    case ColorSpace::xyz: return "xyz";
  }
  return "?";
}
inline const char* to_string(Domain d) { return d == Domain::linear ? "linear" : "encoded"; }
inline const char* to_string(Transfer t) { return t == Transfer::gamma22 ? "gamma22" : "pq"; }

// Planar float64 RGB image. Plane c occupies px[c*w*h .. (c+1)*w*h), row major.
// Tags carry the colorimetric state through the pipeline; ops validate them.
struct ColorImage {
  int w = 0, h = 0;
  ColorSpace space = ColorSpace::rec709;
  Domain domain = Domain::linear;
  std::vector<double> px;

  ColorImage() = default;
  ColorImage(int w_, int h_, ColorSpace s, Domain d) : w(w_), h(h_), space(s), domain(d) {
    if (w <= 0 || h <= 0) fail(Errc::invalid_argument, "image dims must be positive");
    px.assign(std::size_t(3) * w * h, 0.0);
  }

  std::size_t npx() const { return std::size_t(w) * h; }
  double* plane(int c) { return px.data() + std::size_t(c) * npx(); }
  const double* plane(int c) const { return px.data() + std::size_t(c) * npx(); }
  double& at(int c, int y, int x) { return px[std::size_t(c) * npx() + std::size_t(y) * w + x]; }
  double at(int c, int y, int x) const {
    return px[std::size_t(c) * npx() + std::size_t(y) * w + x];
  }
};

}  // namespace hdrtv
