#pragma once

#include "cctn/types.hpp"

#include <string>
#include <vector>

namespace cctn {

enum class Protocol { IcdarDetEval, MsraOriented };

struct MatchConfig {
  Protocol protocol = Protocol::IcdarDetEval;
  double area_recall_threshold = 0.8;     // tr
  double area_precision_threshold = 0.4;  // tp
  double many_match_penalty = 0.8;        // k
  double iou_threshold = 0.5;             // oriented protocol
  double angle_tolerance = M_PI / 8;      // oriented protocol
};

enum class MatchType { OneToOne, OneToMany, ManyToOne };

struct MatchRecord {
  int det = -1;
  int gt = -1;
  MatchType type = MatchType::OneToOne;
};

struct EvalReport {
  double precision = 1.0;
  double recall = 1.0;
  double f_measure = 1.0;
  std::vector<MatchRecord> matches;
  // Micro-averaging state.
  double det_score_sum = 0.0;
  double gt_score_sum = 0.0;
  int det_count = 0;
  int gt_count = 0;
};

// (intersection/gt area, intersection/det area) for axis-aligned boxes.
std::pair<double, double> area_overlap(const OrientedBox& gt, const OrientedBox& det);

// DetEval-style matching on axis-aligned bounding boxes: unambiguous
// one-to-one pairs score 1; split (one gt, several dets) and merge (one det,
// several gts) groups meeting the accumulated thresholds score the penalty k.
// No detections and no ground truth count as vacuous perfection; no
// detections against ground truth give P=1, R=0.
EvalReport match_deteval(const std::vector<OrientedBox>& dets,
                         const std::vector<OrientedBox>& gts, const MatchConfig& config = {});

// Oriented one-to-one matching: both boxes rotate about the gt center by
// -gt.angle, then axis-aligned IoU must exceed the threshold and the angle
// difference must stay inside the tolerance.
EvalReport match_msra(const std::vector<OrientedBox>& dets, const std::vector<OrientedBox>& gts,
                      const MatchConfig& config = {});

// Micro-average across images: sums scores and counts, then divides.
EvalReport summarize(const std::vector<EvalReport>& reports);

// Report file: "image_id P R F" per image, then "ALL P R F", 4 decimals.
void save_report(const std::vector<std::string>& image_ids,
                 const std::vector<EvalReport>& reports, const EvalReport& total,
                 const std::string& path);

}  // namespace cctn
