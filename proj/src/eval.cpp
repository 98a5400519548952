#include "cctn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cctn {

namespace {

double f_measure_of(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

void finalize(EvalReport& rep) {
  rep.precision = rep.det_count > 0 ? rep.det_score_sum / rep.det_count : 1.0;
  rep.recall = rep.gt_count > 0 ? rep.gt_score_sum / rep.gt_count : 1.0;
  rep.f_measure = f_measure_of(rep.precision, rep.recall);
}

}  // namespace

std::pair<double, double> area_overlap(const OrientedBox& gt, const OrientedBox& det) {
  const Rect rg = axis_aligned_bbox(gt), rd = axis_aligned_bbox(det);
  const double inter = rect_intersection_area(rg, rd);
  return {rg.area() > 0 ? inter / rg.area() : 0.0, rd.area() > 0 ? inter / rd.area() : 0.0};
}

EvalReport match_deteval(const std::vector<OrientedBox>& dets,
                         const std::vector<OrientedBox>& gts, const MatchConfig& config) {
  const int nd = static_cast<int>(dets.size());
  const int ng = static_cast<int>(gts.size());
  EvalReport rep;
  rep.det_count = nd;
  rep.gt_count = ng;
  if (nd == 0 || ng == 0) {
    finalize(rep);
    return rep;
  }

  const double tr = config.area_recall_threshold;
  const double tp = config.area_precision_threshold;
  const double k = config.many_match_penalty;

  // Recall and precision fraction matrices over axis-aligned boxes.
  std::vector<std::vector<double>> R(static_cast<size_t>(ng), std::vector<double>(nd));
  std::vector<std::vector<double>> P(static_cast<size_t>(ng), std::vector<double>(nd));
  std::vector<std::vector<bool>> Q(static_cast<size_t>(ng), std::vector<bool>(nd));
  for (int g = 0; g < ng; ++g)
    for (int d = 0; d < nd; ++d) {
      const auto [rf, pf] =
          area_overlap(gts[static_cast<size_t>(g)], dets[static_cast<size_t>(d)]);
      R[static_cast<size_t>(g)][static_cast<size_t>(d)] = rf;
      P[static_cast<size_t>(g)][static_cast<size_t>(d)] = pf;
      Q[static_cast<size_t>(g)][static_cast<size_t>(d)] = rf >= tr && pf >= tp;
    }

  std::vector<double> det_score(static_cast<size_t>(nd), 0.0);
  std::vector<double> gt_score(static_cast<size_t>(ng), 0.0);
  std::vector<bool> det_used(static_cast<size_t>(nd), false);
  std::vector<bool> gt_used(static_cast<size_t>(ng), false);

  // One-to-one: the qualifying pair must be unique in its row and column.
  for (int g = 0; g < ng; ++g) {
    int row_hits = 0, the_d = -1;
    for (int d = 0; d < nd; ++d)
      if (Q[static_cast<size_t>(g)][static_cast<size_t>(d)]) {
        ++row_hits;
        the_d = d;
      }
    if (row_hits != 1) continue;
    int col_hits = 0;
    for (int g2 = 0; g2 < ng; ++g2)
      if (Q[static_cast<size_t>(g2)][static_cast<size_t>(the_d)]) ++col_hits;
    if (col_hits != 1) continue;
    gt_used[static_cast<size_t>(g)] = det_used[static_cast<size_t>(the_d)] = true;
    gt_score[static_cast<size_t>(g)] = det_score[static_cast<size_t>(the_d)] = 1.0;
    rep.matches.push_back({the_d, g, MatchType::OneToOne});
  }

  // One-to-many: one ground-truth line split across several detections.
  for (int g = 0; g < ng; ++g) {
    if (gt_used[static_cast<size_t>(g)]) continue;
    std::vector<int> group;
    double recall_sum = 0.0;
    for (int d = 0; d < nd; ++d) {
      if (det_used[static_cast<size_t>(d)]) continue;
      if (P[static_cast<size_t>(g)][static_cast<size_t>(d)] >= tp &&
          R[static_cast<size_t>(g)][static_cast<size_t>(d)] > 0) {
        group.push_back(d);
        recall_sum += R[static_cast<size_t>(g)][static_cast<size_t>(d)];
      }
    }
    if (group.empty() || recall_sum < tr) continue;
    gt_used[static_cast<size_t>(g)] = true;
    gt_score[static_cast<size_t>(g)] = k;
    for (int d : group) {
      det_used[static_cast<size_t>(d)] = true;
      det_score[static_cast<size_t>(d)] = k;
      rep.matches.push_back({d, g, MatchType::OneToMany});
    }
  }

  // Many-to-one: one detection covering several ground-truth lines.
  for (int d = 0; d < nd; ++d) {
    if (det_used[static_cast<size_t>(d)]) continue;
    std::vector<int> group;
    double precision_sum = 0.0;
    for (int g = 0; g < ng; ++g) {
      if (gt_used[static_cast<size_t>(g)]) continue;
      if (R[static_cast<size_t>(g)][static_cast<size_t>(d)] >= tr) {
        group.push_back(g);
        precision_sum += P[static_cast<size_t>(g)][static_cast<size_t>(d)];
      }
    }
    if (group.empty() || precision_sum < tp) continue;
    det_used[static_cast<size_t>(d)] = true;
    det_score[static_cast<size_t>(d)] = k;
    for (int g : group) {
      gt_used[static_cast<size_t>(g)] = true;
      gt_score[static_cast<size_t>(g)] = k;
      rep.matches.push_back({d, g, MatchType::ManyToOne});
    }
  }

  for (double s : det_score) rep.det_score_sum += s;
  for (double s : gt_score) rep.gt_score_sum += s;
  finalize(rep);
  return rep;
}

EvalReport match_msra(const std::vector<OrientedBox>& dets, const std::vector<OrientedBox>& gts,
                      const MatchConfig& config) {
  const int nd = static_cast<int>(dets.size());
  const int ng = static_cast<int>(gts.size());
  EvalReport rep;
  rep.det_count = nd;
  rep.gt_count = ng;

  struct Candidate {
    double iou;
    int g, d;
  };
  std::vector<Candidate> candidates;
  for (int g = 0; g < ng; ++g) {
    const OrientedBox& gt = gts[static_cast<size_t>(g)];
    for (int d = 0; d < nd; ++d) {
      const OrientedBox& det = dets[static_cast<size_t>(d)];
      double da = std::abs(normalize_half_angle(det.angle - gt.angle));
      da = std::min(da, M_PI - da);
      if (da >= config.angle_tolerance) continue;
      // Rotate the detection center into the gt-aligned frame; both boxes are
      // then compared as axis-aligned rectangles of their own extents.
      const Eigen::Vector2d rel = det.center - gt.center;
      const double ca = std::cos(-gt.angle), sa = std::sin(-gt.angle);
      const Eigen::Vector2d rc(gt.center.x() + ca * rel.x() - sa * rel.y(),
                               gt.center.y() + sa * rel.x() + ca * rel.y());
      const Rect a{gt.center.x() - gt.width / 2, gt.center.y() - gt.height / 2,
                   gt.center.x() + gt.width / 2, gt.center.y() + gt.height / 2};
      const Rect b{rc.x() - det.width / 2, rc.y() - det.height / 2, rc.x() + det.width / 2,
                   rc.y() + det.height / 2};
      const double inter = rect_intersection_area(a, b);
      const double uni = a.area() + b.area() - inter;
      const double iou = uni > 0 ? inter / uni : 0.0;
      if (iou > config.iou_threshold) candidates.push_back({iou, g, d});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.iou > b.iou || (a.iou == b.iou && std::tie(a.g, a.d) < std::tie(b.g, b.d));
  });

  std::vector<bool> det_used(static_cast<size_t>(nd), false);
  std::vector<bool> gt_used(static_cast<size_t>(ng), false);
  for (const Candidate& c : candidates) {
    if (det_used[static_cast<size_t>(c.d)] || gt_used[static_cast<size_t>(c.g)]) continue;
    det_used[static_cast<size_t>(c.d)] = gt_used[static_cast<size_t>(c.g)] = true;
    rep.matches.push_back({c.d, c.g, MatchType::OneToOne});
    rep.det_score_sum += 1.0;
    rep.gt_score_sum += 1.0;
  }
  finalize(rep);
  return rep;
}

EvalReport summarize(const std::vector<EvalReport>& reports) {
  EvalReport total;
  for (const EvalReport& r : reports) {
    total.det_score_sum += r.det_score_sum;
    total.gt_score_sum += r.gt_score_sum;
    total.det_count += r.det_count;
    total.gt_count += r.gt_count;
  }
  finalize(total);
  return total;
}

void save_report(const std::vector<std::string>& image_ids,
                 const std::vector<EvalReport>& reports, const EvalReport& total,
                 const std::string& path) {
  if (image_ids.size() != reports.size())
    throw std::invalid_argument("save_report: ids and reports differ in length");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("report: cannot write " + path);
  char buf[256];
  for (size_t i = 0; i < reports.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s %.4f %.4f %.4f\n", image_ids[i].c_str(),
                  reports[i].precision, reports[i].recall, reports[i].f_measure);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "ALL %.4f %.4f %.4f\n", total.precision, total.recall,
                total.f_measure);
  out << buf;
}

}  // namespace cctn
