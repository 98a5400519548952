#include "cctn/types.hpp"

#include <algorithm>
#include <stdexcept>

namespace cctn {

double normalize_half_angle(double a) {
  while (a > M_PI / 2) a -= M_PI;
  while (a <= -M_PI / 2) a += M_PI;
  return a;
}

OrientedBox::OrientedBox(const Eigen::Vector2d& c, double w, double h, double a)
    : center(c), width(w), height(h), angle(a) {
  if (height > width) {
    std::swap(width, height);
    angle += M_PI / 2;
  }
  angle = normalize_half_angle(angle);
}

std::array<Eigen::Vector2d, 4> OrientedBox::corners() const {
  const Eigen::Vector2d u = axis_long() * (width / 2);
  const Eigen::Vector2d v = axis_short() * (height / 2);
  return {center - u - v, center + u - v, center + u + v, center - u + v};
}

bool OrientedBox::contains(const Eigen::Vector2d& p) const {
  const Eigen::Vector2d d = p - center;
  const double lu = d.dot(axis_long());
  const double lv = d.dot(axis_short());
  return std::abs(lu) <= width / 2 && std::abs(lv) <= height / 2;
}

Rect axis_aligned_bbox(const OrientedBox& box) {
  const auto cs = box.corners();
  Rect r{cs[0].x(), cs[0].y(), cs[0].x(), cs[0].y()};
  for (const auto& c : cs) {
    r.x0 = std::min(r.x0, c.x());
    r.y0 = std::min(r.y0, c.y());
    r.x1 = std::max(r.x1, c.x());
    r.y1 = std::max(r.y1, c.y());
  }
  return r;
}

OrientedBox box_from_rect(const Rect& r) {
  return OrientedBox({(r.x0 + r.x1) / 2, (r.y0 + r.y1) / 2}, r.w(), r.h(), 0.0);
}

double rect_intersection_area(const Rect& a, const Rect& b) {
  const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  return (w > 0 && h > 0) ? w * h : 0.0;
}

namespace {

// Sutherland-Hodgman against one half-plane n.p <= d.
std::vector<Eigen::Vector2d> clip_half_plane(const std::vector<Eigen::Vector2d>& poly,
                                             const Eigen::Vector2d& n, double d) {
  std::vector<Eigen::Vector2d> out;
  const size_t m = poly.size();
  for (size_t i = 0; i < m; ++i) {
    const Eigen::Vector2d& a = poly[i];
    const Eigen::Vector2d& b = poly[(i + 1) % m];
    const double da = n.dot(a) - d;
    const double db = n.dot(b) - d;
    if (da <= 0) out.push_back(a);
    if ((da < 0 && db > 0) || (da > 0 && db < 0)) {
      const double t = da / (da - db);
      out.push_back(a + t * (b - a));
    }
  }
  return out;
}

std::vector<Eigen::Vector2d> clip_to_frame(const OrientedBox& box, double w, double h) {
  const auto cs = box.corners();
  std::vector<Eigen::Vector2d> poly(cs.begin(), cs.end());
  poly = clip_half_plane(poly, {-1, 0}, 0);
  if (!poly.empty()) poly = clip_half_plane(poly, {1, 0}, w);
  if (!poly.empty()) poly = clip_half_plane(poly, {0, -1}, 0);
  if (!poly.empty()) poly = clip_half_plane(poly, {0, 1}, h);
  return poly;
}

double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
  double a = 0.0;
  const size_t m = poly.size();
  for (size_t i = 0; i < m; ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % m];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return std::abs(a) / 2;
}

}  // namespace

bool clip_box_to_frame(const OrientedBox& box, double w, double h, OrientedBox& out) {
  const auto poly = clip_to_frame(box, w, h);
  if (poly.size() < 3 || polygon_area(poly) <= 0.0) return false;
  const Eigen::Vector2d u = box.axis_long();
  const Eigen::Vector2d v = box.axis_short();
  double ulo = 1e300, uhi = -1e300, vlo = 1e300, vhi = -1e300;
  for (const auto& p : poly) {
    const Eigen::Vector2d d = p - box.center;
    ulo = std::min(ulo, d.dot(u));
    uhi = std::max(uhi, d.dot(u));
    vlo = std::min(vlo, d.dot(v));
    vhi = std::max(vhi, d.dot(v));
  }
  const Eigen::Vector2d c = box.center + u * ((ulo + uhi) / 2) + v * ((vlo + vhi) / 2);
  out = OrientedBox(c, uhi - ulo, vhi - vlo, box.angle);
  return out.width > 0 && out.height > 0;
}

double box_inside_fraction(const OrientedBox& box, double w, double h) {
  if (box.area() <= 0) return 0.0;
  return polygon_area(clip_to_frame(box, w, h)) / box.area();
}

OrientedBox map_box(const OrientedBox& box, const AffineMap& t) {
  std::array<Eigen::Vector2d, 4> cs = box.corners();
  for (auto& c : cs) c = t.apply(c);
  // Exact for isotropic maps; minimum-area fit of the mapped corners otherwise.
  double best_area = -1.0;
  OrientedBox best;
  for (int e = 0; e < 4; ++e) {
    const Eigen::Vector2d dir = cs[(e + 1) % 4] - cs[e];
    const double len = dir.norm();
    if (len <= 0) continue;
    const Eigen::Vector2d u = dir / len;
    const Eigen::Vector2d v(-u.y(), u.x());
    double ulo = 1e300, uhi = -1e300, vlo = 1e300, vhi = -1e300;
    for (const auto& c : cs) {
      ulo = std::min(ulo, c.dot(u));
      uhi = std::max(uhi, c.dot(u));
      vlo = std::min(vlo, c.dot(v));
      vhi = std::max(vhi, c.dot(v));
    }
    const double area = (uhi - ulo) * (vhi - vlo);
    if (best_area < 0 || area < best_area) {
      best_area = area;
      const Eigen::Vector2d c = u * ((ulo + uhi) / 2) + v * ((vlo + vhi) / 2);
      best = OrientedBox(c, uhi - ulo, vhi - vlo, std::atan2(u.y(), u.x()));
    }
  }
  if (best_area < 0) return OrientedBox(t.apply(box.center), 0.0, 0.0, 0.0);
  return best;
}

}  // namespace cctn
