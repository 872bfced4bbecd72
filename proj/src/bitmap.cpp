#include "meshvote/bitmap.hpp"

#include <algorithm>

namespace meshvote {

double box_iou(const PixelBox& a, const PixelBox& b) noexcept {
  const double ix = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double iy = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  const double inter = (ix > 0.0 && iy > 0.0) ? ix * iy : 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::optional<PixelBox> mask_bounding_box(const MaskImage& mask) {
  int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y) == 0) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return std::nullopt;
  return PixelBox{double(x0), double(y0), double(x1 + 1), double(y1 + 1)};
}

}  // namespace meshvote
