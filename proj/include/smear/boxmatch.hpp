#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "smear/dataset.hpp"

namespace smear {

inline constexpr double kDefaultIouThreshold = 0.4;

/// Intersection over union of two valid boxes, in [0, 1].
double iou(const BoundingBox& a, const BoundingBox& b);

struct MatchPair {
  std::size_t detection = 0;
  std::size_t ground_truth = 0;
  double iou = 0.0;

  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

/// One-to-one pairing. Every pair has iou strictly above the threshold used;
/// pairs and the two unmatched lists cover each input index exactly once.
/// Pairs are listed in acceptance order; unmatched lists are ascending.
struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<std::size_t> unmatched_detections;   // false positives
  std::vector<std::size_t> unmatched_ground_truth;  // false negatives

  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

// Unscored matching (segmented objects, annotator boxes): greedy over all
// candidate pairs in descending IoU, ties by lower object then lower gt index.
// Labels are ignored.
MatchResult match_by_best_overlap(std::span<const BoundingBox> objects,
                                  std::span<const GroundTruthObject> gts,
                                  double threshold = kDefaultIouThreshold);

// Scored matching: detections in descending score (ties by input index), each
// claiming the free gt of highest IoU above threshold (ties by lower index).
// Labels are ignored.
MatchResult match_detections(std::span<const Detection> dets,
                             std::span<const GroundTruthObject> gts,
                             double threshold = kDefaultIouThreshold);

}  // namespace smear
