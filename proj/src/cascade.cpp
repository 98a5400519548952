#include "cctn/cascade.hpp"

#include "cctn/executor.hpp"
#include "cctn/supervision.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cctn {

NetworkGraph graph_from_weights(const WeightStore& store) {
  const auto it = store.find("conv1_1.weight");
  if (it == store.end())
    throw std::runtime_error("weights: store lacks conv1_1, not a CCTN network");
  const double multiplier = static_cast<double>(it->second.extent(0)) / 64.0;
  const HeadMode mode =
      store.count("head_cl.weight") ? HeadMode::Fine : HeadMode::Coarse;
  NetworkGraph graph = build_cctn_graph(mode, multiplier);
  validate_weights(graph, store);
  return graph;
}

PipelineConfig load_pipeline(const std::string& coarse_weights_path,
                             const std::string& fine_weights_path) {
  PipelineConfig config;
  config.coarse_weights = load_weights(coarse_weights_path);
  config.coarse_graph = graph_from_weights(config.coarse_weights);
  if (config.coarse_graph.mode != HeadMode::Coarse)
    throw std::runtime_error("weights: " + coarse_weights_path + " holds a fine network");
  config.fine_weights = load_weights(fine_weights_path);
  config.fine_graph = graph_from_weights(config.fine_weights);
  if (config.fine_graph.mode != HeadMode::Fine)
    throw std::runtime_error("weights: " + fine_weights_path + " holds a coarse network");
  return config;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Clips to the content area of a fine patch (the zero border carries no
// image evidence) expressed in patch coordinates.
bool clip_to_content(const OrientedBox& box, double pad, double content, OrientedBox& out) {
  OrientedBox shifted(box.center - Eigen::Vector2d(pad, pad), box.width, box.height, box.angle);
  OrientedBox clipped;
  if (!clip_box_to_frame(shifted, content, content, clipped)) return false;
  out = OrientedBox(clipped.center + Eigen::Vector2d(pad, pad), clipped.width, clipped.height,
                    clipped.angle);
  return true;
}

struct ScaleRun {
  std::vector<ScoredBox> boxes;  // original image coordinates
};

ScaleRun run_scale(const Tensorf& image, Eigen::Index target_h, Eigen::Index target_w,
                   const PipelineConfig& config, const std::string& tag,
                   DetectionResult& result) {
  ScaleRun run;
  const Eigen::Index orig_h = image.extent(1), orig_w = image.extent(2);
  const Tensorf scaled = resize_bilinear(image, target_h, target_w);
  const AffineMap to_scaled{static_cast<double>(target_w) / static_cast<double>(orig_w),
                            static_cast<double>(target_h) / static_cast<double>(orig_h), 0.0,
                            0.0};
  const AffineMap to_orig = to_scaled.inverse();

  const auto t_coarse = Clock::now();
  const GraphRunner<float> coarse(config.coarse_graph, config.coarse_weights);
  const ForwardPass<float> pass = coarse.forward(normalize_image(scaled), /*retain=*/false);
  const MapF tr_map = coarse.heatmaps(pass)[0];
  result.timing.coarse_ms += ms_since(t_coarse);
  if (config.retain_heatmaps) result.heatmaps.emplace_back("tr_" + tag, tr_map);

  const auto t_post = Clock::now();
  const std::vector<Component> comps = filter_small(
      connected_components(binarize(tr_map, config.coarse_threshold)), config.min_component_area);
  result.timing.post_ms += ms_since(t_post);

  int region_index = 0;
  for (const Component& comp : comps) {
    if (config.coarse_only) {
      const OrientedBox bb = comp.bbox();
      run.boxes.push_back({map_to_image(bb, to_orig), mean_heat(tr_map, bb)});
      continue;
    }
    const CoarseDecision decision =
        coarse_decide(comp, config.area_ratio_threshold, config.borderline_ratio_threshold);
    if (decision.kind == CoarseDecision::Kind::FinalLine) {
      run.boxes.push_back(
          {map_to_image(decision.line, to_orig), mean_heat(tr_map, decision.line)});
      continue;
    }

    // Refinement: square region resampled from the scaled image.
    const FineRegion region = crop_fine_region(scaled, Annotation{}, decision.region_center,
                                               decision.region_side, config.fine_size);
    const auto t_fine = Clock::now();
    const GraphRunner<float> fine(config.fine_graph, config.fine_weights);
    const ForwardPass<float> fine_pass =
        fine.forward(normalize_image(region.image), /*retain=*/false);
    const auto maps = fine.heatmaps(fine_pass);
    result.timing.fine_ms += ms_since(t_fine);
    const MapF& tl_map = maps[0];
    const MapF& cl_map = maps[1];
    const std::string rtag = tag + "_r" + std::to_string(region_index++);
    if (config.retain_heatmaps) {
      result.heatmaps.emplace_back("cl_" + rtag, cl_map);
      result.heatmaps.emplace_back("tl_" + rtag, tl_map);
    }

    const auto t_extract = Clock::now();
    const std::vector<OrientedBox> lines =
        fine_extract(cl_map, tl_map, config.fine_threshold, config.min_component_area);
    const double pad = std::lround(config.fine_size * 0.1);
    const double content = config.fine_size - 2 * pad;
    const AffineMap patch_to_orig = to_orig.after(region.to_patch.inverse());
    for (const OrientedBox& line : lines) {
      OrientedBox in_content;
      if (!clip_to_content(line, pad, content, in_content)) continue;
      run.boxes.push_back(
          {map_to_image(in_content, patch_to_orig), mean_heat(tl_map, in_content)});
    }
    result.timing.post_ms += ms_since(t_extract);
  }
  return run;
}

}  // namespace

DetectionResult detect(const Tensorf& image, const PipelineConfig& config) {
  if (image.rank() != 3 || image.extent(0) != 3)
    throw std::invalid_argument("detect: image must be 3xHxW");
  const Eigen::Index orig_h = image.extent(1), orig_w = image.extent(2);

  DetectionResult result;
  const Eigen::Index S = config.scale_size;
  const ScaleRun square = run_scale(image, S, S, config, "s0", result);

  // Long-side scale, aspect preserved; skipped when the short side would
  // fall below the network minimum.
  const double f = static_cast<double>(S) / static_cast<double>(std::max(orig_h, orig_w));
  const Eigen::Index lh = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::lround(orig_h * f)));
  const Eigen::Index lw = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::lround(orig_w * f)));
  ScaleRun long_side;
  if (std::min(lh, lw) >= kMinInputExtent && !(lh == S && lw == S))
    long_side = run_scale(image, lh, lw, config, "s1", result);

  const auto t_post = Clock::now();
  std::vector<ScoredBox> merged = merge_scales(square.boxes, long_side.boxes);

  std::vector<ScoredBox> final_boxes;
  for (const ScoredBox& d : merged) {
    OrientedBox clipped;
    if (clip_box_to_frame(d.box, static_cast<double>(orig_w), static_cast<double>(orig_h),
                          clipped))
      final_boxes.push_back({clipped, d.score});
  }
  std::sort(final_boxes.begin(), final_boxes.end(), [](const ScoredBox& a, const ScoredBox& b) {
    return std::tie(a.box.center.y(), a.box.center.x()) <
           std::tie(b.box.center.y(), b.box.center.x());
  });
  result.boxes = std::move(final_boxes);
  result.timing.post_ms += ms_since(t_post);
  return result;
}

std::vector<DetectionResult> detect_batch(const std::vector<Tensorf>& images,
                                          const PipelineConfig& config) {
  std::vector<DetectionResult> results;
  results.reserve(images.size());
  for (const Tensorf& image : images) results.push_back(detect(image, config));
  return results;
}

std::string report_timing(const DetectionResult& result) {
  std::ostringstream os;
  os << "stage time_ms\n";
  os << "coarse " << result.timing.coarse_ms << '\n';
  os << "fine " << result.timing.fine_ms << '\n';
  os << "post " << result.timing.post_ms << '\n';
  os << "total " << result.timing.coarse_ms + result.timing.fine_ms + result.timing.post_ms
     << '\n';
  return os.str();
}

}  // namespace cctn
