#pragma once

#include <array>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "smear/boxmatch.hpp"
#include "smear/dataset.hpp"

namespace smear {

ClassCounts count_objects(std::span<const Detection> dets);
ClassCounts count_objects(std::span<const GroundTruthObject> gts);

/// Rows are ground-truth classes plus a final "spurious" row (detections with
/// no ground truth); columns are predicted classes plus a final "missed"
/// column (ground truth with no detection). Difficult ground truth, and any
/// detection paired with it, is left out.
struct ConfusionMatrix {
  static constexpr std::size_t kExtra = kNumClasses;  // index of spurious row / missed column
  std::array<std::array<std::size_t, kNumClasses + 1>, kNumClasses + 1> cells{};

  std::size_t& at(std::size_t row, std::size_t col) { return cells[row][col]; }
  std::size_t at(std::size_t row, std::size_t col) const { return cells[row][col]; }
  std::size_t missed(CellClass gt) const { return cells[index_of(gt)][kExtra]; }
  std::size_t spurious(CellClass det) const { return cells[kExtra][index_of(det)]; }
  std::size_t total() const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Throws std::invalid_argument if `match` does not index into dets/gts.
ConfusionMatrix confusion(const MatchResult& match, std::span<const Detection> dets,
                          std::span<const GroundTruthObject> gts);

/// Tally backing accuracy_excluding, summable across images.
struct AccuracyTally {
  std::size_t correct = 0;
  std::size_t total = 0;

  /// Empty when no ground truth survives the exclusions.
  std::optional<double> value() const;
  AccuracyTally& operator+=(const AccuracyTally& o) {
    correct += o.correct;
    total += o.total;
    return *this;
  }
};

inline const std::set<CellClass> kDefaultExcluded = {CellClass::rbc};

/// Matched-and-correctly-labeled ground truth over non-excluded, non-difficult
/// ground truth. Misses count against; unmatched detections are ignored.
AccuracyTally accuracy_tally(const MatchResult& match, std::span<const Detection> dets,
                             std::span<const GroundTruthObject> gts,
                             const std::set<CellClass>& excluded = kDefaultExcluded);

std::optional<double> accuracy_excluding(const MatchResult& match, std::span<const Detection> dets,
                                         std::span<const GroundTruthObject> gts,
                                         const std::set<CellClass>& excluded = kDefaultExcluded);

struct ClassScore {
  std::size_t tp = 0, fp = 0, fn = 0;

  bool applicable() const { return tp + fp + fn > 0; }
  double precision() const;  // 0 when tp + fp == 0
  double recall() const;     // 0 when tp + fn == 0
  /// 2PR / (P + R), 0 when P + R == 0; empty when the class is absent on both sides.
  std::optional<double> f1() const;

  ClassScore& operator+=(const ClassScore& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

using ClassScores = std::array<ClassScore, kNumClasses>;

ClassScores& operator+=(ClassScores& a, const ClassScores& b);

/// TP: pairs whose labels are both c. FP: detections labeled c outside such
/// pairs. FN: non-difficult ground truth labeled c outside such pairs.
/// Detections paired with difficult ground truth are not scored.
ClassScores per_class_f1(const MatchResult& match, std::span<const Detection> dets,
                         std::span<const GroundTruthObject> gts);

struct AgreementReport {
  ClassCounts counts_a;
  ClassCounts counts_b;
  ClassScores scores;           // A as reference
  std::size_t matched = 0;      // pairs, difficult excluded
  std::size_t label_disagreements = 0;
};

/// Per image, non-difficult objects of B are matched to those of A with
/// match_by_best_overlap; scores treat A as the reference. Throws
/// std::invalid_argument when the image id sets differ.
AgreementReport annotator_agreement(const Dataset& a, const Dataset& b,
                                    double threshold = kDefaultIouThreshold);

}  // namespace smear
