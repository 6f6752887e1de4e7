#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>

#include "smear/boxmatch.hpp"
#include "smear/dataset.hpp"
#include "smear/forest.hpp"
#include "smear/segfeat.hpp"

namespace smear {

inline constexpr double kDefaultScoreThreshold = 0.65;

enum class CoarseLabel : std::uint8_t { rbc, other };

std::string_view to_string(CoarseLabel c);

struct StageOneDetection {
  BoundingBox box;
  CoarseLabel label = CoarseLabel::other;
  double score = 1.0;

  friend bool operator==(const StageOneDetection&, const StageOneDetection&) = default;
};

struct StageOneRecord {
  std::string id;
  int width = 0;
  int height = 0;
  std::string path;
  std::vector<StageOneDetection> detections;
};

/// Stage-one file: the detection file shape with labels "rbc" or "other".
/// A fine non-rbc class name is read as "other".
std::vector<StageOneRecord> parse_stage_one(std::string_view text);
std::string serialize_stage_one(const std::vector<StageOneRecord>& records);

/// Keeps detections with score >= threshold, in order.
template <typename Det>
std::vector<Det> filter_by_score(const std::vector<Det>& dets,
                                 double threshold = kDefaultScoreThreshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("score threshold must lie in [0, 1]");
  }
  std::vector<Det> out;
  for (const auto& d : dets) {
    if (d.score >= threshold) out.push_back(d);
  }
  return out;
}

/// rbc detections pass through; each "other" box is featurized and classified,
/// scored stage-one score x predicted-class probability. Boxes never change.
std::vector<Detection> two_stage_classify(const std::vector<StageOneDetection>& stage1,
                                          const cv::Mat& image, const ForestModel& classifier);

struct BaselineParams {
  SegmentParams segmentation;
  ForestParams forest;
  double iou_threshold = kDefaultIouThreshold;
};

/// segment -> features -> forest; one Detection per segmented object, scored
/// by the predicted class's probability.
std::vector<Detection> run_baseline(const cv::Mat& image, const ForestModel& model,
                                    const SegmentParams& params = {});

using ImageLoader = std::function<cv::Mat(const ImageRecord&)>;

struct TrainingSet {
  std::vector<std::vector<double>> X;
  std::vector<CellClass> y;
};

/// Baseline training data: segmented objects matched to ground truth by best
/// overlap (IoU above threshold). Unmatched objects and matches to difficult
/// cells are dropped.
TrainingSet baseline_training_set(const Dataset& d, const ImageLoader& load,
                                  const BaselineParams& params);

/// Stage-two training data: features of non-rbc ground-truth boxes.
TrainingSet stage_two_training_set(const Dataset& d, const ImageLoader& load,
                                   bool include_difficult = false);

/// Loads record.path relative to `root` (absolute paths are used as-is).
ImageLoader file_loader(std::string root);

}  // namespace smear
