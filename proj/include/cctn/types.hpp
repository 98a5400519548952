#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace cctn {

using Index = Eigen::Index;

// Single-channel maps at image resolution. Heat-maps hold probabilities in
// [0,1]; binary masks hold {0,1}.
template <typename T>
using Map2 = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MapF = Map2<float>;
using MapU8 = Map2<std::uint8_t>;
using HeatMap = MapF;

// Rotated rectangle: center, width >= height, angle in (-pi/2, pi/2].
// Axis-aligned boxes are the angle-0 special case (or pi/2 after the
// width>=height normalization of a tall box).
struct OrientedBox {
  Eigen::Vector2d center{0.0, 0.0};
  double width = 0.0;
  double height = 0.0;
  double angle = 0.0;

  OrientedBox() = default;
  OrientedBox(const Eigen::Vector2d& c, double w, double h, double a);

  Eigen::Vector2d axis_long() const { return {std::cos(angle), std::sin(angle)}; }
  Eigen::Vector2d axis_short() const { return {-std::sin(angle), std::cos(angle)}; }

  // Corner order: (-w/2,-h/2), (w/2,-h/2), (w/2,h/2), (-w/2,h/2) in box frame.
  std::array<Eigen::Vector2d, 4> corners() const;

  double area() const { return width * height; }
  bool contains(const Eigen::Vector2d& p) const;
};

// Axis-aligned rectangle in continuous coordinates.
struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double w() const { return x1 - x0; }
  double h() const { return y1 - y0; }
  double area() const { return w() > 0 && h() > 0 ? w() * h() : 0.0; }
};

Rect axis_aligned_bbox(const OrientedBox& box);
OrientedBox box_from_rect(const Rect& r);

double rect_intersection_area(const Rect& a, const Rect& b);

// Wraps an angle into (-pi/2, pi/2] modulo pi.
double normalize_half_angle(double a);

// Per-axis affine map x' = sx*x + tx, y' = sy*y + ty. Covers every coordinate
// change in the pipeline (image resizing, region cropping); no rotation.
struct AffineMap {
  double sx = 1.0, sy = 1.0, tx = 0.0, ty = 0.0;

  Eigen::Vector2d apply(const Eigen::Vector2d& p) const {
    return {sx * p.x() + tx, sy * p.y() + ty};
  }
  AffineMap inverse() const { return {1.0 / sx, 1.0 / sy, -tx / sx, -ty / sy}; }
  // Composition: (b.after(a))(p) == b(a(p)).
  AffineMap after(const AffineMap& a) const {
    return {sx * a.sx, sy * a.sy, sx * a.tx + tx, sy * a.ty + ty};
  }
};

// Maps a box through a per-axis affine. Under anisotropic scaling a rotated
// rectangle becomes a parallelogram; the result is the minimum-area rectangle
// of the mapped corners, which is exact for isotropic maps.
OrientedBox map_box(const OrientedBox& box, const AffineMap& t);

// Clips an oriented box to the frame [0,w]x[0,h] by intersecting its corner
// polygon with the frame and re-fitting extents in the box frame. Returns
// false when nothing remains.
bool clip_box_to_frame(const OrientedBox& box, double w, double h, OrientedBox& out);

// Fraction of the box area surviving a clip against [0,w]x[0,h] (polygon
// area, exact).
double box_inside_fraction(const OrientedBox& box, double w, double h);

}  // namespace cctn
