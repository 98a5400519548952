#pragma once

#include "cctn/geometry.hpp"
#include "cctn/graph.hpp"
#include "cctn/weights.hpp"

#include <string>
#include <utility>
#include <vector>

namespace cctn {

struct PipelineConfig {
  NetworkGraph coarse_graph;
  NetworkGraph fine_graph;
  WeightStore coarse_weights;
  WeightStore fine_weights;

  double coarse_threshold = 0.3;
  double fine_threshold = 0.5;
  double area_ratio_threshold = 0.7;
  double borderline_ratio_threshold = 5.0;
  Eigen::Index min_component_area = 20;

  // Test scales: square scale_size x scale_size plus long-side scale_size
  // with the aspect ratio kept. The fine stage always runs on fine_size
  // square regions.
  Eigen::Index scale_size = 500;
  Eigen::Index fine_size = 500;

  bool coarse_only = false;     // emit every component's bounding box directly
  bool retain_heatmaps = false;
};

// Builds graphs from weight files; the width multiplier and head mode are
// recovered from the stored tensor shapes.
PipelineConfig load_pipeline(const std::string& coarse_weights_path,
                             const std::string& fine_weights_path);
NetworkGraph graph_from_weights(const WeightStore& store);

struct StageTiming {
  double coarse_ms = 0.0;
  double fine_ms = 0.0;
  double post_ms = 0.0;
};

struct DetectionResult {
  std::vector<ScoredBox> boxes;  // original image coordinates, sorted by (y,x)
  StageTiming timing;
  std::vector<std::pair<std::string, MapF>> heatmaps;  // when retained
};

// Full two-stage pipeline on one image (3xHxW in [0,1]).
DetectionResult detect(const Tensorf& image, const PipelineConfig& config);

// Order-preserving; element-wise identical to detect.
std::vector<DetectionResult> detect_batch(const std::vector<Tensorf>& images,
                                          const PipelineConfig& config);

std::string report_timing(const DetectionResult& result);

}  // namespace cctn
