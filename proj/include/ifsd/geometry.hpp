#pragma once

#include <array>
#include <cstdint>

namespace ifsd::geometry {

/// Normalized center-form box: (cx, cy) center, (w, h) extent, all relative
/// to the image size.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  /// True when all coordinates lie in [0, 1] and the derived corners are ordered.
  bool valid() const;

  friend bool operator==(const Box&, const Box&) = default;
};

/// Normalized corner-form box (x1, y1) top-left, (x2, y2) bottom-right.
struct CornerBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  friend bool operator==(const CornerBox&, const CornerBox&) = default;
};

/// Integer pixel box, half-open: covers columns [x1, x2) and rows [y1, y2).
struct PixelBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  int width() const { return x2 - x1; }
  int height() const { return y2 - y1; }
  bool valid_in(int image_width, int image_height) const;

  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

CornerBox to_corner(const Box& b);
/// Throws std::invalid_argument when x1 > x2 or y1 > y2.
Box from_corner(const CornerBox& c);

Box from_pixels(const PixelBox& p, int image_width, int image_height);
/// Rounds outward to whole pixels and clips to the image.
PixelBox to_pixels(const Box& b, int image_width, int image_height);

double iou(const CornerBox& a, const CornerBox& b);
double iou(const Box& a, const Box& b);

struct GiouResult {
  double value = 0.0;
  // Set when the enclosing box has zero area; value is 0 in that case.
  bool degenerate = false;
};

GiouResult giou_checked(const CornerBox& a, const CornerBox& b);
GiouResult giou_checked(const Box& a, const Box& b);
double giou(const Box& a, const Box& b);
double giou(const CornerBox& a, const CornerBox& b);

/// L1 distance over the four center-form coordinates.
double l1_distance(const Box& a, const Box& b);

}  // namespace ifsd::geometry
