#include "ifsd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ifsd::geometry {

namespace {
bool unit(double v) { return v >= 0.0 && v <= 1.0; }
}  // namespace

bool Box::valid() const {
  return unit(cx) && unit(cy) && unit(w) && unit(h) && std::isfinite(cx + cy + w + h);
}

bool PixelBox::valid_in(int image_width, int image_height) const {
  return x1 >= 0 && y1 >= 0 && x1 < x2 && y1 < y2 && x2 <= image_width && y2 <= image_height;
}

CornerBox to_corner(const Box& b) {
  return {b.cx - 0.5 * b.w, b.cy - 0.5 * b.h, b.cx + 0.5 * b.w, b.cy + 0.5 * b.h};
}

Box from_corner(const CornerBox& c) {
  if (c.x1 > c.x2 || c.y1 > c.y2) {
    throw std::invalid_argument("corner box with x1 > x2 or y1 > y2");
  }
  return {0.5 * (c.x1 + c.x2), 0.5 * (c.y1 + c.y2), c.x2 - c.x1, c.y2 - c.y1};
}

Box from_pixels(const PixelBox& p, int image_width, int image_height) {
  const double w = image_width;
  const double h = image_height;
  return from_corner({p.x1 / w, p.y1 / h, p.x2 / w, p.y2 / h});
}

PixelBox to_pixels(const Box& b, int image_width, int image_height) {
  const CornerBox c = to_corner(b);
  PixelBox p{static_cast<int>(std::floor(c.x1 * image_width + 1e-9)),
             static_cast<int>(std::floor(c.y1 * image_height + 1e-9)),
             static_cast<int>(std::ceil(c.x2 * image_width - 1e-9)),
             static_cast<int>(std::ceil(c.y2 * image_height - 1e-9))};
  p.x1 = std::clamp(p.x1, 0, image_width);
  p.y1 = std::clamp(p.y1, 0, image_height);
  p.x2 = std::clamp(p.x2, 0, image_width);
  p.y2 = std::clamp(p.y2, 0, image_height);
  return p;
}

namespace {

struct Overlap {
  double inter;
  double uni;
  double enclosing;
};

Overlap overlap(const CornerBox& a, const CornerBox& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  const double ew = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
  const double eh = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
  return {inter, uni, ew * eh};
}

}  // namespace

double iou(const CornerBox& a, const CornerBox& b) {
  const Overlap o = overlap(a, b);
  return o.uni > 0.0 ? o.inter / o.uni : 0.0;
}

double iou(const Box& a, const Box& b) { return iou(to_corner(a), to_corner(b)); }

GiouResult giou_checked(const CornerBox& a, const CornerBox& b) {
  const Overlap o = overlap(a, b);
  if (!(o.enclosing > 0.0)) {
    return {0.0, true};
  }
  const double i = o.uni > 0.0 ? o.inter / o.uni : 0.0;
  return {i - (o.enclosing - o.uni) / o.enclosing, false};
}

GiouResult giou_checked(const Box& a, const Box& b) {
  return giou_checked(to_corner(a), to_corner(b));
}

double giou(const Box& a, const Box& b) { return giou_checked(a, b).value; }
double giou(const CornerBox& a, const CornerBox& b) { return giou_checked(a, b).value; }

double l1_distance(const Box& a, const Box& b) {
  return std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) + std::abs(a.w - b.w) +
         std::abs(a.h - b.h);
}

}  // namespace ifsd::geometry
