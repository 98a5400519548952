#pragma once

#include "cctn/rng.hpp"
#include "cctn/tensor.hpp"
#include "cctn/types.hpp"

#include <string>
#include <vector>

namespace cctn {

// Ground truth for one image: text-line boxes (axis-aligned is angle 0).
struct Annotation {
  std::string image_id;
  Eigen::Index width = 0;
  Eigen::Index height = 0;
  std::vector<OrientedBox> boxes;
};

struct MaskSet {
  MapU8 region;        // 1 inside any text-line box
  MapF central_line;   // soft band along each line's long axis
  MapU8 text_line;     // same support as region, fine-stage coordinates
};

// Pixel (ix,iy) is tested at its center (ix+0.5, iy+0.5).
MapU8 region_mask(const Annotation& ann);
MapU8 text_line_mask(const Annotation& ann);

// Truncated Gaussian band around each box's long axis: value
// (exp(-d^2/(2 sigma^2)) - e^-2) / (1 - e^-2) with sigma = 0.125*H for
// perpendicular distance d < 0.25*H inside the box's length extent, 0
// elsewhere; exactly 1 on the axis and exactly 0 at the band edge.
// Overlapping boxes resolve by per-pixel max. Boxes under 2 px tall paint a
// single row at value 1.
MapF central_line_mask(const Annotation& ann);

MaskSet make_masks(const Annotation& ann);

// Images are 3xHxW tensors with values in [0,1]. Networks consume them after
// mean subtraction.
Tensorf normalize_image(const Tensorf& image);

struct PatchSample {
  Tensorf image;
  Annotation ann;
};

// Uniformly placed patch_size x patch_size crop. Boxes are clipped to the
// window; boxes retaining under 25% of their area are dropped.
PatchSample sample_training_patch(const Tensorf& image, const Annotation& ann, Rng& rng,
                                  Eigen::Index patch_size = 500);

struct AugmentParams {
  double rotate_range_rad = 15.0 * M_PI / 180.0;
  double flip_prob = 0.5;
  double noise_sigma = 0.02;
};

// Rotation (uniform in +-range, boxes rotated identically), horizontal flip,
// additive Gaussian pixel noise. Deterministic for a given rng state.
PatchSample augment(const PatchSample& sample, Rng& rng, const AugmentParams& params = {});

struct FineRegion {
  Tensorf image;       // out_size x out_size, zero padded frame
  Annotation ann;      // boxes mapped into patch coordinates
  AffineMap to_patch;  // source image -> patch coordinates
};

// Resamples the square (center, side) window to the central content area of
// an out_size x out_size patch with a zero border of out_size/10 on each
// side (500 -> 50 px border, 400x400 content). Out-of-image area reads as 0.
FineRegion crop_fine_region(const Tensorf& image, const Annotation& ann,
                            const Eigen::Vector2d& center, double side,
                            Eigen::Index out_size = 500);

// Text-like scene: 1-6 striped bars (the text lines) over a textured
// background with distractor shapes. Difficulty in [0,2] scales clutter,
// orientation range and bar count.
PatchSample generate_synthetic_scene(Rng& rng, double difficulty, Eigen::Index size = 128);

// Annotation file: one box per line, either "x1,y1,x2,y2" or
// "cx,cy,w,h,theta_radians"; '#' starts a comment; trailing non-numeric
// fields are ignored.
Annotation load_annotation(const std::string& path, Eigen::Index width, Eigen::Index height);
void save_annotation(const Annotation& ann, const std::string& path);

}  // namespace cctn
