#include "smear/boxmatch.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace smear {

namespace {

void check_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("IoU threshold must lie in (0, 1)");
  }
}

std::vector<std::size_t> unmatched(const std::vector<bool>& taken) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < taken.size(); ++i) {
    if (!taken[i]) out.push_back(i);
  }
  return out;
}

}  // namespace

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

MatchResult match_by_best_overlap(std::span<const BoundingBox> objects,
                                  std::span<const GroundTruthObject> gts, double threshold) {
  check_threshold(threshold);
  std::vector<MatchPair> candidates;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    for (std::size_t j = 0; j < gts.size(); ++j) {
      const double v = iou(objects[i], gts[j].box);
      if (v > threshold) candidates.push_back({i, j, v});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const MatchPair& a, const MatchPair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.detection != b.detection) return a.detection < b.detection;
    return a.ground_truth < b.ground_truth;
  });

  MatchResult out;
  std::vector<bool> obj_taken(objects.size(), false);
  std::vector<bool> gt_taken(gts.size(), false);
  for (const auto& c : candidates) {
    if (obj_taken[c.detection] || gt_taken[c.ground_truth]) continue;
    obj_taken[c.detection] = true;
    gt_taken[c.ground_truth] = true;
    out.pairs.push_back(c);
  }
  out.unmatched_detections = unmatched(obj_taken);
  out.unmatched_ground_truth = unmatched(gt_taken);
  return out;
}

MatchResult match_detections(std::span<const Detection> dets,
                             std::span<const GroundTruthObject> gts, double threshold) {
  check_threshold(threshold);
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  MatchResult out;
  std::vector<bool> det_taken(dets.size(), false);
  std::vector<bool> gt_taken(gts.size(), false);
  for (const auto d : order) {
    double best = threshold;
    std::size_t best_gt = gts.size();
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (gt_taken[j]) continue;
      const double v = iou(dets[d].box, gts[j].box);
      if (v > best) {
        best = v;
        best_gt = j;
      }
    }
    if (best_gt == gts.size()) continue;
    det_taken[d] = true;
    gt_taken[best_gt] = true;
    out.pairs.push_back({d, best_gt, best});
  }
  out.unmatched_detections = unmatched(det_taken);
  out.unmatched_ground_truth = unmatched(gt_taken);
  return out;
}

}  // namespace smear
