#include "cctn/supervision.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cctn {

namespace {

struct BoxFrame {
  Eigen::Vector2d center, u, v;
  double half_w, half_h;

  explicit BoxFrame(const OrientedBox& b)
      : center(b.center), u(b.axis_long()), v(b.axis_short()), half_w(b.width / 2),
        half_h(b.height / 2) {}

  void local(double px, double py, double& lu, double& lv) const {
    const double dx = px - center.x(), dy = py - center.y();
    lu = dx * u.x() + dy * u.y();
    lv = dx * v.x() + dy * v.y();
  }
};

// Pixel rows/cols covered by the box's bounding rectangle, clamped to frame.
struct PixelSpan {
  Eigen::Index x0, x1, y0, y1;
  PixelSpan(const OrientedBox& b, Eigen::Index w, Eigen::Index h) {
    const Rect r = axis_aligned_bbox(b);
    x0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(r.x0)));
    y0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(r.y0)));
    x1 = std::min<Eigen::Index>(w - 1, static_cast<Eigen::Index>(std::ceil(r.x1)));
    y1 = std::min<Eigen::Index>(h - 1, static_cast<Eigen::Index>(std::ceil(r.y1)));
  }
  bool empty() const { return x1 < x0 || y1 < y0; }
};

void paint_box(MapU8& mask, const OrientedBox& box) {
  PixelSpan span(box, mask.cols(), mask.rows());
  if (span.empty()) return;
  const BoxFrame f(box);
  for (Eigen::Index y = span.y0; y <= span.y1; ++y)
    for (Eigen::Index x = span.x0; x <= span.x1; ++x) {
      double lu, lv;
      f.local(x + 0.5, y + 0.5, lu, lv);
      if (std::abs(lu) <= f.half_w && std::abs(lv) <= f.half_h) mask(y, x) = 1;
    }
}

}  // namespace

MapU8 region_mask(const Annotation& ann) {
  MapU8 mask = MapU8::Zero(ann.height, ann.width);
  for (const OrientedBox& b : ann.boxes) paint_box(mask, b);
  return mask;
}

MapU8 text_line_mask(const Annotation& ann) { return region_mask(ann); }

MapF central_line_mask(const Annotation& ann) {
  MapF mask = MapF::Zero(ann.height, ann.width);
  const double floor_value = std::exp(-2.0);
  for (const OrientedBox& b : ann.boxes) {
    PixelSpan span(b, mask.cols(), mask.rows());
    if (span.empty()) continue;
    const BoxFrame f(b);
    const double H = b.height;
    const bool degenerate = H < 2.0;
    const double radius = 0.25 * H;
    const double sigma = 0.125 * H;
    for (Eigen::Index y = span.y0; y <= span.y1; ++y)
      for (Eigen::Index x = span.x0; x <= span.x1; ++x) {
        double lu, lv;
        f.local(x + 0.5, y + 0.5, lu, lv);
        if (std::abs(lu) > f.half_w) continue;
        float value = 0.0f;
        if (degenerate) {
          if (std::abs(lv) < 0.5) value = 1.0f;
        } else {
          const double d = std::abs(lv);
          if (d < radius) {
            const double g = std::exp(-d * d / (2.0 * sigma * sigma));
            value = static_cast<float>((g - floor_value) / (1.0 - floor_value));
          }
        }
        if (value > mask(y, x)) mask(y, x) = value;
      }
  }
  return mask;
}

MaskSet make_masks(const Annotation& ann) {
  return {region_mask(ann), central_line_mask(ann), text_line_mask(ann)};
}

Tensorf normalize_image(const Tensorf& image) {
  Tensorf out(image.shape());
  out.array() = image.array() - 0.5f;
  return out;
}

PatchSample sample_training_patch(const Tensorf& image, const Annotation& ann, Rng& rng,
                                  Eigen::Index patch_size) {
  const Eigen::Index h = image.extent(1), w = image.extent(2);
  if (h < patch_size || w < patch_size)
    throw std::invalid_argument("sample_training_patch: image smaller than patch");
  const Eigen::Index ox = rng.uniform_int(0, w - patch_size);
  const Eigen::Index oy = rng.uniform_int(0, h - patch_size);

  PatchSample out;
  out.image = Tensorf({3, patch_size, patch_size});
  for (Eigen::Index c = 0; c < 3; ++c)
    for (Eigen::Index y = 0; y < patch_size; ++y)
      std::copy_n(&image(c, oy + y, ox), patch_size, &out.image(c, y, 0));

  out.ann.image_id = ann.image_id;
  out.ann.width = patch_size;
  out.ann.height = patch_size;
  const double ps = static_cast<double>(patch_size);
  for (OrientedBox b : ann.boxes) {
    b.center -= Eigen::Vector2d(static_cast<double>(ox), static_cast<double>(oy));
    const double kept = box_inside_fraction(b, ps, ps);
    if (kept < 0.25) continue;
    OrientedBox clipped;
    if (clip_box_to_frame(b, ps, ps, clipped)) out.ann.boxes.push_back(clipped);
  }
  return out;
}

namespace {

Tensorf rotate_image(const Tensorf& image, double angle) {
  const Eigen::Index h = image.extent(1), w = image.extent(2);
  const double cx = w / 2.0, cy = h / 2.0;
  const double ca = std::cos(-angle), sa = std::sin(-angle);
  Tensorf out({image.extent(0), h, w});
  for (Eigen::Index c = 0; c < image.extent(0); ++c)
    for (Eigen::Index y = 0; y < h; ++y)
      for (Eigen::Index x = 0; x < w; ++x) {
        const double dx = (x + 0.5) - cx, dy = (y + 0.5) - cy;
        const double sx = cx + ca * dx - sa * dy - 0.5;
        const double sy = cy + sa * dx + ca * dy - 0.5;
        const Eigen::Index x0 = static_cast<Eigen::Index>(std::floor(sx));
        const Eigen::Index y0 = static_cast<Eigen::Index>(std::floor(sy));
        const double fx = sx - x0, fy = sy - y0;
        double acc = 0.0;
        for (int j = 0; j < 2; ++j)
          for (int i = 0; i < 2; ++i) {
            const Eigen::Index xi = x0 + i, yi = y0 + j;
            if (xi < 0 || xi >= w || yi < 0 || yi >= h) continue;
            const double wgt = (i ? fx : 1 - fx) * (j ? fy : 1 - fy);
            acc += wgt * static_cast<double>(image(c, yi, xi));
          }
        out(c, y, x) = static_cast<float>(acc);
      }
  return out;
}

}  // namespace

PatchSample augment(const PatchSample& sample, Rng& rng, const AugmentParams& params) {
  PatchSample out = sample;
  const Eigen::Index h = out.image.extent(1), w = out.image.extent(2);
  const Eigen::Vector2d center(w / 2.0, h / 2.0);

  const double angle =
      params.rotate_range_rad > 0 ? rng.uniform(-params.rotate_range_rad, params.rotate_range_rad)
                                  : 0.0;
  if (angle != 0.0) {
    out.image = rotate_image(out.image, angle);
    const Eigen::Rotation2D<double> rot(angle);
    for (OrientedBox& b : out.ann.boxes) {
      b.center = center + rot * (b.center - center);
      b = OrientedBox(b.center, b.width, b.height, b.angle + angle);
    }
  }

  if (rng.bernoulli(params.flip_prob)) {
    Tensorf flipped({3, h, w});
    for (Eigen::Index c = 0; c < 3; ++c)
      for (Eigen::Index y = 0; y < h; ++y)
        for (Eigen::Index x = 0; x < w; ++x) flipped(c, y, x) = out.image(c, y, w - 1 - x);
    out.image = std::move(flipped);
    for (OrientedBox& b : out.ann.boxes)
      b = OrientedBox({static_cast<double>(w) - b.center.x(), b.center.y()}, b.width, b.height,
                      -b.angle);
  }

  if (params.noise_sigma > 0) {
    for (Eigen::Index i = 0; i < out.image.size(); ++i) {
      const double v = out.image[i] + rng.normal(0.0, params.noise_sigma);
      out.image[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

FineRegion crop_fine_region(const Tensorf& image, const Annotation& ann,
                            const Eigen::Vector2d& center, double side, Eigen::Index out_size) {
  if (side <= 0) throw std::invalid_argument("crop_fine_region: non-positive side");
  const Eigen::Index pad = static_cast<Eigen::Index>(std::lround(out_size * 0.1));
  const Eigen::Index content = out_size - 2 * pad;
  const double scale = static_cast<double>(content) / side;
  const double x0 = center.x() - side / 2, y0 = center.y() - side / 2;

  FineRegion out;
  out.to_patch = AffineMap{scale, scale, pad - scale * x0, pad - scale * y0};
  out.image = Tensorf({3, out_size, out_size});
  const Eigen::Index h = image.extent(1), w = image.extent(2);
  const AffineMap to_image = out.to_patch.inverse();
  for (Eigen::Index c = 0; c < 3; ++c)
    for (Eigen::Index y = pad; y < pad + content; ++y)
      for (Eigen::Index x = pad; x < pad + content; ++x) {
        const Eigen::Vector2d src = to_image.apply({x + 0.5, y + 0.5});
        const double sx = src.x() - 0.5, sy = src.y() - 0.5;
        const Eigen::Index ix = static_cast<Eigen::Index>(std::floor(sx));
        const Eigen::Index iy = static_cast<Eigen::Index>(std::floor(sy));
        const double fx = sx - ix, fy = sy - iy;
        double acc = 0.0;
        for (int j = 0; j < 2; ++j)
          for (int i = 0; i < 2; ++i) {
            const Eigen::Index xi = ix + i, yi = iy + j;
            if (xi < 0 || xi >= w || yi < 0 || yi >= h) continue;
            acc += (i ? fx : 1 - fx) * (j ? fy : 1 - fy) * static_cast<double>(image(c, yi, xi));
          }
        out.image(c, y, x) = static_cast<float>(acc);
      }

  out.ann.image_id = ann.image_id;
  out.ann.width = out_size;
  out.ann.height = out_size;
  for (const OrientedBox& b : ann.boxes) {
    const OrientedBox mapped = map_box(b, out.to_patch);
    if (box_inside_fraction(mapped, static_cast<double>(out_size), static_cast<double>(out_size)) >
        0.0)
      out.ann.boxes.push_back(mapped);
  }
  return out;
}

// ---------------------------------------------------------------------------
// synthetic scenes

namespace {

struct Stroke {
  double u0, u1, v0, v1;  // extents in the bar frame
};

void render_bar(Tensorf& image, const OrientedBox& bar, double ink, Rng& rng) {
  // Glyph-like texture: vertical strokes at a quasi-regular pitch plus
  // occasional connectors, all expressed in the bar frame.
  std::vector<Stroke> strokes;
  const double w = bar.width, h = bar.height;
  const double pitch = rng.uniform(0.45, 0.75) * h;
  const double sw = rng.uniform(0.14, 0.22) * h;
  const double v_span = 0.42 * h;
  for (double u = -w / 2 + 0.06 * w; u < w / 2 - 0.05 * w; u += pitch) {
    if (rng.bernoulli(0.92))
      strokes.push_back({u, u + sw, -v_span, v_span});
    if (rng.bernoulli(0.4)) {
      const double vj = rng.uniform(-0.3, 0.3) * h;
      const double len = std::min(pitch * rng.uniform(0.5, 1.0), w / 2 - u);
      strokes.push_back({u, u + len, vj - sw / 2, vj + sw / 2});
    }
  }

  PixelSpan span(bar, image.extent(2), image.extent(1));
  if (span.empty()) return;
  const BoxFrame f(bar);
  for (Eigen::Index y = span.y0; y <= span.y1; ++y)
    for (Eigen::Index x = span.x0; x <= span.x1; ++x) {
      double lu, lv;
      f.local(x + 0.5, y + 0.5, lu, lv);
      if (std::abs(lu) > f.half_w || std::abs(lv) > f.half_h) continue;
      bool inked = false;
      for (const Stroke& s : strokes)
        if (lu >= s.u0 && lu <= s.u1 && lv >= s.v0 && lv <= s.v1) {
          inked = true;
          break;
        }
      if (inked)
        for (Eigen::Index c = 0; c < 3; ++c)
          image(c, y, x) = static_cast<float>(ink);
    }
}

void render_disc(Tensorf& image, double cx, double cy, double radius, double value, bool ring) {
  const Eigen::Index h = image.extent(1), w = image.extent(2);
  const Eigen::Index x0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(cx - radius - 1));
  const Eigen::Index x1 = std::min<Eigen::Index>(w - 1, static_cast<Eigen::Index>(cx + radius + 1));
  const Eigen::Index y0 = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(cy - radius - 1));
  const Eigen::Index y1 = std::min<Eigen::Index>(h - 1, static_cast<Eigen::Index>(cy + radius + 1));
  const double inner = ring ? radius * 0.72 : -1.0;
  for (Eigen::Index y = y0; y <= y1; ++y)
    for (Eigen::Index x = x0; x <= x1; ++x) {
      const double r = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
      if (r <= radius && r > inner)
        for (Eigen::Index c = 0; c < 3; ++c) image(c, y, x) = static_cast<float>(value);
    }
}

bool bars_too_close(const OrientedBox& a, const std::vector<OrientedBox>& others, double gap) {
  const Rect ra = axis_aligned_bbox(a);
  for (const OrientedBox& b : others) {
    const Rect rb = axis_aligned_bbox(b);
    if (std::min(ra.x1, rb.x1) - std::max(ra.x0, rb.x0) > -gap &&
        std::min(ra.y1, rb.y1) - std::max(ra.y0, rb.y0) > -gap)
      return true;
  }
  return false;
}

}  // namespace

PatchSample generate_synthetic_scene(Rng& rng, double difficulty, Eigen::Index size) {
  const double d = std::clamp(difficulty, 0.0, 2.0);
  const double S = static_cast<double>(size);

  PatchSample out;
  out.image = Tensorf({3, size, size});
  out.ann.image_id = "synthetic";
  out.ann.width = size;
  out.ann.height = size;

  // Background: light base, directional gradient, smooth blobs, tint.
  const double base = rng.uniform(0.6, 0.82);
  const double grad_amp = rng.uniform(0.0, 0.06 + 0.05 * d);
  const double grad_dir = rng.uniform(0.0, 2 * M_PI);
  const double gx = std::cos(grad_dir), gy = std::sin(grad_dir);
  double tint[3];
  for (double& t : tint) t = rng.uniform(-0.03, 0.03);
  for (Eigen::Index c = 0; c < 3; ++c)
    for (Eigen::Index y = 0; y < size; ++y)
      for (Eigen::Index x = 0; x < size; ++x)
        out.image(c, y, x) = static_cast<float>(
            base + tint[c] + grad_amp * ((gx * x + gy * y) / S - 0.5));

  const int n_blobs = static_cast<int>(1 + 2 * d);
  for (int i = 0; i < n_blobs; ++i) {
    const double bx = rng.uniform(0, S), by = rng.uniform(0, S);
    const double sigma = rng.uniform(0.12, 0.3) * S;
    const double amp = rng.uniform(-1.0, 1.0) * (0.03 + 0.04 * d);
    for (Eigen::Index y = 0; y < size; ++y)
      for (Eigen::Index x = 0; x < size; ++x) {
        const double r2 = (x - bx) * (x - bx) + (y - by) * (y - by);
        const float addend = static_cast<float>(amp * std::exp(-r2 / (2 * sigma * sigma)));
        for (Eigen::Index c = 0; c < 3; ++c) out.image(c, y, x) += addend;
      }
  }

  // Text bars. Some scenes get a deliberately close parallel pair, which the
  // coarse stage tends to merge and the fine stage must separate.
  const int max_extra = std::min(5, 1 + static_cast<int>(2 * d));
  int n_bars = 1 + static_cast<int>(rng.uniform_int(0, max_extra));
  const bool close_pair = d >= 0.5 && rng.bernoulli(0.45);
  for (int i = 0; i < n_bars; ++i) {
    OrientedBox bar;
    bool placed = false;
    if (close_pair && i == 1 && !out.ann.boxes.empty()) {
      const OrientedBox& prev = out.ann.boxes.back();
      const double gap = rng.uniform(0.3, 0.65) * prev.height;
      const Eigen::Vector2d offset = prev.axis_short() * (prev.height + gap);
      bar = OrientedBox(prev.center + offset, prev.width * rng.uniform(0.85, 1.1),
                        prev.height * rng.uniform(0.9, 1.1), prev.angle);
      placed = box_inside_fraction(bar, S, S) > 0.995;
    }
    for (int attempt = 0; attempt < 40 && !placed; ++attempt) {
      const double h = rng.uniform(0.10, 0.16 + 0.05 * std::min(d, 1.0)) * S;
      const double w = std::min(rng.uniform(2.8, 5.5) * h, 0.78 * S);
      const double max_angle = d < 0.25 ? 0.12 : 0.35;
      const double angle = rng.bernoulli(0.5) ? 0.0 : rng.uniform(-max_angle, max_angle);
      const double hw = w / 2 * std::abs(std::cos(angle)) + h / 2 * std::abs(std::sin(angle));
      const double hh = w / 2 * std::abs(std::sin(angle)) + h / 2 * std::abs(std::cos(angle));
      if (2 * hw + 4 >= S || 2 * hh + 4 >= S) continue;
      const double cx = rng.uniform(hw + 2, S - hw - 2);
      const double cy = rng.uniform(hh + 2, S - hh - 2);
      bar = OrientedBox({cx, cy}, w, h, angle);
      placed = !bars_too_close(bar, out.ann.boxes, 0.5 * h);
    }
    if (!placed) continue;
    const double ink = rng.uniform(0.02, 0.16);
    render_bar(out.image, bar, ink, rng);
    out.ann.boxes.push_back(bar);
  }

  // Distractors: contrastive but aperiodic shapes.
  const int n_distract = static_cast<int>(rng.uniform_int(0, 1 + static_cast<int>(1.5 * d)));
  for (int i = 0; i < n_distract; ++i) {
    for (int attempt = 0; attempt < 20; ++attempt) {
      const double radius = rng.uniform(0.05, 0.13) * S;
      const double cx = rng.uniform(radius, S - radius);
      const double cy = rng.uniform(radius, S - radius);
      const OrientedBox probe({cx, cy}, 2 * radius, 2 * radius, 0.0);
      if (bars_too_close(probe, out.ann.boxes, 6.0)) continue;
      render_disc(out.image, cx, cy, radius, rng.uniform(0.02, 0.2), rng.bernoulli(0.5));
      break;
    }
  }

  // Pixel noise.
  const double noise = 0.008 + 0.008 * d;
  for (Eigen::Index i = 0; i < out.image.size(); ++i)
    out.image[i] = static_cast<float>(
        std::clamp(static_cast<double>(out.image[i]) + rng.normal(0.0, noise), 0.0, 1.0));
  return out;
}

// ---------------------------------------------------------------------------
// annotation files

Annotation load_annotation(const std::string& path, Eigen::Index width, Eigen::Index height) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("annotation: cannot open " + path);
  Annotation ann;
  ann.width = width;
  ann.height = height;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::vector<double> fields;
    std::string token;
    std::istringstream ls(line);
    bool numeric_prefix = true;
    while (std::getline(ls, token, ',') && numeric_prefix) {
      try {
        size_t used = 0;
        const double v = std::stod(token, &used);
        while (used < token.size() && std::isspace(static_cast<unsigned char>(token[used])))
          ++used;
        if (used != token.size()) throw std::invalid_argument("trailing text");
        fields.push_back(v);
      } catch (const std::exception&) {
        numeric_prefix = false;  // trailing transcript fields are ignored
      }
    }
    if (fields.empty()) continue;
    if (fields.size() >= 5) {
      ann.boxes.emplace_back(Eigen::Vector2d{fields[0], fields[1]}, fields[2], fields[3],
                             fields[4]);
    } else if (fields.size() == 4) {
      const double x0 = std::min(fields[0], fields[2]), x1 = std::max(fields[0], fields[2]);
      const double y0 = std::min(fields[1], fields[3]), y1 = std::max(fields[1], fields[3]);
      ann.boxes.emplace_back(Eigen::Vector2d{(x0 + x1) / 2, (y0 + y1) / 2}, x1 - x0, y1 - y0,
                             0.0);
    } else {
      std::ostringstream os;
      os << "annotation: " << path << ':' << lineno << ": expected 4 or 5 numeric fields, got "
         << fields.size();
      throw std::runtime_error(os.str());
    }
    OrientedBox& b = ann.boxes.back();
    if (!(b.width > 0) || !(b.height > 0)) {
      std::ostringstream os;
      os << "annotation: " << path << ':' << lineno << ": box extents must be positive";
      throw std::runtime_error(os.str());
    }
  }
  return ann;
}

void save_annotation(const Annotation& ann, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("annotation: cannot write " + path);
  char buf[160];
  for (const OrientedBox& b : ann.boxes) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.9f\n", b.center.x(), b.center.y(),
                  b.width, b.height, b.angle);
    out << buf;
  }
}

}  // namespace cctn
