#pragma once

#include "cctn/types.hpp"

#include <string>
#include <vector>

namespace cctn {

// Pixel set iff value > threshold (strict).
MapU8 binarize(const MapF& map, double threshold);

struct Component {
  std::vector<Eigen::Vector2i> pixels;  // (x, y), 8-connected
  Eigen::Index min_x = 0, min_y = 0, max_x = 0, max_y = 0;  // inclusive bbox

  Eigen::Index area() const { return static_cast<Eigen::Index>(pixels.size()); }
  Eigen::Index bbox_w() const { return max_x - min_x + 1; }
  Eigen::Index bbox_h() const { return max_y - min_y + 1; }
  double area_ratio() const {
    return static_cast<double>(area()) / static_cast<double>(bbox_w() * bbox_h());
  }
  double borderline_ratio() const {
    const double a = static_cast<double>(bbox_w()), b = static_cast<double>(bbox_h());
    return std::max(a, b) / std::min(a, b);
  }
  // Bounding box in continuous coordinates (pixel-extent convention).
  OrientedBox bbox() const;
};

// 8-connectivity partition, ordered by (top, left) of the bounding box.
std::vector<Component> connected_components(const MapU8& mask);

// Drops speckle components below min_area pixels.
std::vector<Component> filter_small(std::vector<Component> components, Eigen::Index min_area = 20);

struct CoarseDecision {
  enum class Kind { FinalLine, Region };
  Kind kind = Kind::Region;
  OrientedBox line;               // FinalLine: axis-aligned bbox, map coordinates
  Eigen::Vector2d region_center;  // Region: square crop
  double region_side = 0.0;       // 1.2 x longer bbox side
};

// Elongated solid components (area ratio > 0.7, borderline ratio > 5) become
// final lines; everything else becomes a square region crop for refinement.
CoarseDecision coarse_decide(const Component& comp, double area_ratio_threshold = 0.7,
                             double borderline_ratio_threshold = 5.0);

// Minimum-area enclosing rectangle of a pixel set, treating each pixel as a
// unit square (a single pixel yields a 1x1 box at angle 0). Convex hull plus
// an edge-direction sweep.
OrientedBox min_area_rect(const std::vector<Eigen::Vector2i>& pixels);
OrientedBox min_area_rect_points(const std::vector<Eigen::Vector2d>& points);

// Text-line extraction from the fine heads: each central-line component's MAR
// fixes the axis (preliminary height 2x the MAR minor side); the associated
// text-line component's MAR refines height, length and center. Boxes are
// clipped to the map frame; an empty central-line mask yields no boxes.
std::vector<OrientedBox> fine_extract(const MapF& cl_map, const MapF& tl_map,
                                      double threshold = 0.5, Eigen::Index min_area = 20);

struct ScoredBox {
  OrientedBox box;
  double score = 0.0;
};

OrientedBox map_to_image(const OrientedBox& box, const AffineMap& transform);

// Merges detections whose axis-aligned IoU exceeds 0.5 into the union
// bounding box, iterated to a fixpoint; output sorted by center (y, x).
std::vector<ScoredBox> merge_scales(const std::vector<ScoredBox>& a,
                                    const std::vector<ScoredBox>& b);

double axis_aligned_iou(const OrientedBox& a, const OrientedBox& b);

// Mean heat-map value over the box (detection score).
double mean_heat(const MapF& map, const OrientedBox& box);

// Detection file: "cx,cy,w,h,theta_radians,score" per line.
void save_detections(const std::vector<ScoredBox>& dets, const std::string& path);
std::vector<ScoredBox> load_detections(const std::string& path);

}  // namespace cctn
