#include "cctn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cctn {

MapU8 binarize(const MapF& map, double threshold) {
  return (map.cast<double>() > threshold).cast<std::uint8_t>();
}

OrientedBox Component::bbox() const {
  return OrientedBox({(min_x + max_x + 1) / 2.0, (min_y + max_y + 1) / 2.0},
                     static_cast<double>(bbox_w()), static_cast<double>(bbox_h()), 0.0);
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  int make() {
    parent.push_back(static_cast<int>(parent.size()));
    return parent.back();
  }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void merge(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::vector<Component> connected_components(const MapU8& mask) {
  const Eigen::Index h = mask.rows(), w = mask.cols();
  std::vector<int> labels(static_cast<size_t>(h * w), -1);
  UnionFind uf;

  // First pass: neighbors above-left, above, above-right, and left.
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      if (!mask(y, x)) continue;
      const size_t idx = static_cast<size_t>(y * w + x);
      int label = -1;
      const Eigen::Index nx[4] = {x - 1, x - 1, x, x + 1};
      const Eigen::Index ny[4] = {y, y - 1, y - 1, y - 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || nx[k] >= w || ny[k] < 0) continue;
        const int nl = labels[static_cast<size_t>(ny[k] * w + nx[k])];
        if (nl < 0) continue;
        if (label < 0)
          label = nl;
        else
          uf.merge(label, nl);
      }
      labels[idx] = label >= 0 ? label : uf.make();
    }

  // Second pass: flatten labels and gather pixels in scan order.
  std::vector<int> root_to_comp(uf.parent.size(), -1);
  std::vector<Component> comps;
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      const size_t idx = static_cast<size_t>(y * w + x);
      if (labels[idx] < 0) continue;
      const int root = uf.find(labels[idx]);
      int ci = root_to_comp[static_cast<size_t>(root)];
      if (ci < 0) {
        ci = static_cast<int>(comps.size());
        root_to_comp[static_cast<size_t>(root)] = ci;
        comps.push_back(Component{{}, x, y, x, y});
      }
      Component& c = comps[static_cast<size_t>(ci)];
      c.pixels.emplace_back(static_cast<int>(x), static_cast<int>(y));
      c.min_x = std::min(c.min_x, x);
      c.max_x = std::max(c.max_x, x);
      c.min_y = std::min(c.min_y, y);
      c.max_y = std::max(c.max_y, y);
    }

  std::sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) {
    return std::tie(a.min_y, a.min_x, a.max_y, a.max_x) <
           std::tie(b.min_y, b.min_x, b.max_y, b.max_x);
  });
  return comps;
}

std::vector<Component> filter_small(std::vector<Component> components, Eigen::Index min_area) {
  std::erase_if(components, [min_area](const Component& c) { return c.area() < min_area; });
  return components;
}

CoarseDecision coarse_decide(const Component& comp, double area_ratio_threshold,
                             double borderline_ratio_threshold) {
  if (comp.pixels.empty()) throw std::invalid_argument("coarse_decide: empty component");
  CoarseDecision d;
  if (comp.area_ratio() > area_ratio_threshold &&
      comp.borderline_ratio() > borderline_ratio_threshold) {
    d.kind = CoarseDecision::Kind::FinalLine;
    d.line = comp.bbox();
  } else {
    d.kind = CoarseDecision::Kind::Region;
    const OrientedBox bb = comp.bbox();
    d.region_center = bb.center;
    d.region_side = 1.2 * std::max(bb.width, bb.height);
  }
  return d;
}

namespace {

// Andrew monotone chain; returns hull in counter-clockwise order.
std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
                          return a.x() == b.x() && a.y() == b.y();
                        }),
            pts.end());
  const size_t n = pts.size();
  if (n < 3) return pts;
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace

OrientedBox min_area_rect_points(const std::vector<Eigen::Vector2d>& points) {
  if (points.empty()) throw std::invalid_argument("min_area_rect: empty point set");
  const std::vector<Eigen::Vector2d> hull = convex_hull(points);
  if (hull.size() == 1) return OrientedBox(hull[0], 0.0, 0.0, 0.0);

  double best_area = -1.0;
  OrientedBox best;
  const size_t n = hull.size();
  for (size_t e = 0; e < n; ++e) {
    const Eigen::Vector2d dir = hull[(e + 1) % n] - hull[e];
    const double len = dir.norm();
    if (len < 1e-12) continue;
    const Eigen::Vector2d u = dir / len;
    const Eigen::Vector2d v(-u.y(), u.x());
    double ulo = 1e300, uhi = -1e300, vlo = 1e300, vhi = -1e300;
    for (const Eigen::Vector2d& p : hull) {
      ulo = std::min(ulo, p.dot(u));
      uhi = std::max(uhi, p.dot(u));
      vlo = std::min(vlo, p.dot(v));
      vhi = std::max(vhi, p.dot(v));
    }
    const double area = (uhi - ulo) * (vhi - vlo);
    if (best_area < 0 || area < best_area) {
      best_area = area;
      const Eigen::Vector2d c = u * ((ulo + uhi) / 2) + v * ((vlo + vhi) / 2);
      best = OrientedBox(c, uhi - ulo, vhi - vlo, std::atan2(u.y(), u.x()));
    }
  }
  if (best_area < 0) {
    // All hull points coincide on a segment shorter than the tolerance.
    return OrientedBox(hull[0], 0.0, 0.0, 0.0);
  }
  return best;
}

OrientedBox min_area_rect(const std::vector<Eigen::Vector2i>& pixels) {
  if (pixels.empty()) throw std::invalid_argument("min_area_rect: empty pixel set");
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(pixels.size() * 4);
  for (const auto& p : pixels) {
    const double x = p.x(), y = p.y();
    pts.emplace_back(x, y);
    pts.emplace_back(x + 1, y);
    pts.emplace_back(x, y + 1);
    pts.emplace_back(x + 1, y + 1);
  }
  return min_area_rect_points(pts);
}

std::vector<OrientedBox> fine_extract(const MapF& cl_map, const MapF& tl_map, double threshold,
                                      Eigen::Index min_area) {
  if (cl_map.rows() != tl_map.rows() || cl_map.cols() != tl_map.cols())
    throw std::invalid_argument("fine_extract: heat-map sizes differ");
  const Eigen::Index h = cl_map.rows(), w = cl_map.cols();

  const std::vector<Component> cl_comps =
      filter_small(connected_components(binarize(cl_map, threshold)), min_area);
  const std::vector<Component> tl_comps =
      filter_small(connected_components(binarize(tl_map, threshold)), min_area);

  // Label image for center-containment lookups.
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tl_label(h, w);
  tl_label.setConstant(-1);
  for (size_t i = 0; i < tl_comps.size(); ++i)
    for (const auto& p : tl_comps[i].pixels) tl_label(p.y(), p.x()) = static_cast<int>(i);

  std::vector<OrientedBox> out;
  for (const Component& cl : cl_comps) {
    const OrientedBox cl_mar = min_area_rect(cl.pixels);
    const double h_cl = cl_mar.height;
    OrientedBox box(cl_mar.center, cl_mar.width, 2.0 * h_cl, cl_mar.angle);

    // Associate a text-line component: the one containing the MAR center,
    // else the one with maximal pixel overlap.
    int tl_idx = -1;
    const Eigen::Index cx = static_cast<Eigen::Index>(std::floor(cl_mar.center.x()));
    const Eigen::Index cy = static_cast<Eigen::Index>(std::floor(cl_mar.center.y()));
    if (cx >= 0 && cx < w && cy >= 0 && cy < h) tl_idx = tl_label(cy, cx);
    if (tl_idx < 0) {
      std::vector<Eigen::Index> overlap(tl_comps.size(), 0);
      for (const auto& p : cl.pixels) {
        const int l = tl_label(p.y(), p.x());
        if (l >= 0) ++overlap[static_cast<size_t>(l)];
      }
      Eigen::Index best = 0;
      for (size_t i = 0; i < overlap.size(); ++i)
        if (overlap[i] > best) {
          best = overlap[i];
          tl_idx = static_cast<int>(i);
        }
    }

    if (tl_idx >= 0) {
      const OrientedBox tl_mar = min_area_rect(tl_comps[static_cast<size_t>(tl_idx)].pixels);
      const Eigen::Vector2d axis = cl_mar.axis_long();
      const Eigen::Vector2d perp = cl_mar.axis_short();
      double t_top = 1e300, t_bottom = -1e300, u_lo = 1e300, u_hi = -1e300;
      for (const Eigen::Vector2d& c : tl_mar.corners()) {
        const Eigen::Vector2d d = c - cl_mar.center;
        t_top = std::min(t_top, d.dot(perp));
        t_bottom = std::max(t_bottom, d.dot(perp));
        u_lo = std::min(u_lo, d.dot(axis));
        u_hi = std::max(u_hi, d.dot(axis));
      }
      const Eigen::Vector2d center = cl_mar.center + axis * ((u_lo + u_hi) / 2) +
                                     perp * ((t_top + t_bottom) / 2);
      box = OrientedBox(center, u_hi - u_lo, t_bottom - t_top, cl_mar.angle);
    }

    OrientedBox clipped;
    if (clip_box_to_frame(box, static_cast<double>(w), static_cast<double>(h), clipped))
      out.push_back(clipped);
  }
  return out;
}

OrientedBox map_to_image(const OrientedBox& box, const AffineMap& transform) {
  return map_box(box, transform);
}

double axis_aligned_iou(const OrientedBox& a, const OrientedBox& b) {
  const Rect ra = axis_aligned_bbox(a), rb = axis_aligned_bbox(b);
  const double inter = rect_intersection_area(ra, rb);
  const double uni = ra.area() + rb.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

std::vector<ScoredBox> merge_scales(const std::vector<ScoredBox>& a,
                                    const std::vector<ScoredBox>& b) {
  std::vector<ScoredBox> all = a;
  all.insert(all.end(), b.begin(), b.end());

  bool merged = true;
  while (merged) {
    merged = false;
    for (size_t i = 0; i < all.size() && !merged; ++i)
      for (size_t j = i + 1; j < all.size() && !merged; ++j) {
        if (axis_aligned_iou(all[i].box, all[j].box) <= 0.5) continue;
        const Rect ra = axis_aligned_bbox(all[i].box), rb = axis_aligned_bbox(all[j].box);
        const Rect u{std::min(ra.x0, rb.x0), std::min(ra.y0, rb.y0), std::max(ra.x1, rb.x1),
                     std::max(ra.y1, rb.y1)};
        all[i] = {box_from_rect(u), std::max(all[i].score, all[j].score)};
        all.erase(all.begin() + static_cast<std::ptrdiff_t>(j));
        merged = true;
      }
  }
  std::sort(all.begin(), all.end(), [](const ScoredBox& x, const ScoredBox& y) {
    return std::tie(x.box.center.y(), x.box.center.x()) <
           std::tie(y.box.center.y(), y.box.center.x());
  });
  return all;
}

double mean_heat(const MapF& map, const OrientedBox& box) {
  const Rect r = axis_aligned_bbox(box);
  const Eigen::Index x0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(r.x0)));
  const Eigen::Index y0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(r.y0)));
  const Eigen::Index x1 = std::min<Eigen::Index>(map.cols() - 1,
                                                 static_cast<Eigen::Index>(std::ceil(r.x1)));
  const Eigen::Index y1 = std::min<Eigen::Index>(map.rows() - 1,
                                                 static_cast<Eigen::Index>(std::ceil(r.y1)));
  double sum = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index y = y0; y <= y1; ++y)
    for (Eigen::Index x = x0; x <= x1; ++x)
      if (box.contains({x + 0.5, y + 0.5})) {
        sum += map(y, x);
        ++count;
      }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

void save_detections(const std::vector<ScoredBox>& dets, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("detections: cannot write " + path);
  char buf[200];
  for (const ScoredBox& d : dets) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.9f,%.6f\n", d.box.center.x(),
                  d.box.center.y(), d.box.width, d.box.height, d.box.angle, d.score);
    out << buf;
  }
}

std::vector<ScoredBox> load_detections(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("detections: cannot open " + path);
  std::vector<ScoredBox> dets;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    double f[6];
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &f[0], &f[1], &f[2], &f[3], &f[4],
                    &f[5]) != 6) {
      std::ostringstream os;
      os << "detections: " << path << ':' << lineno << ": expected 6 comma-separated values";
      throw std::runtime_error(os.str());
    }
    dets.push_back({OrientedBox({f[0], f[1]}, f[2], f[3], f[4]), f[5]});
  }
  return dets;
}

}  // namespace cctn
