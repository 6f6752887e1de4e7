#include "smear/metrics.hpp"

#include <stdexcept>

namespace smear {

namespace {

void check_indices(const MatchResult& m, std::size_t n_dets, std::size_t n_gts) {
  std::vector<int> det_seen(n_dets, 0), gt_seen(n_gts, 0);
  auto mark = [](std::vector<int>& seen, std::size_t i) {
    if (i >= seen.size() || seen[i]++ > 0) {
      throw std::invalid_argument("match result is inconsistent with its inputs");
    }
  };
  for (const auto& p : m.pairs) {
    mark(det_seen, p.detection);
    mark(gt_seen, p.ground_truth);
  }
  for (auto i : m.unmatched_detections) mark(det_seen, i);
  for (auto i : m.unmatched_ground_truth) mark(gt_seen, i);
  for (int s : det_seen) {
    if (s == 0) throw std::invalid_argument("match result does not cover every detection");
  }
  for (int s : gt_seen) {
    if (s == 0) throw std::invalid_argument("match result does not cover every ground truth");
  }
}

std::vector<GroundTruthObject> non_difficult(const std::vector<GroundTruthObject>& objs) {
  std::vector<GroundTruthObject> out;
  for (const auto& o : objs) {
    if (!o.difficult) out.push_back(o);
  }
  return out;
}

}  // namespace

ClassCounts count_objects(std::span<const Detection> dets) {
  ClassCounts c;
  for (const auto& d : dets) ++c[d.label];
  return c;
}

ClassCounts count_objects(std::span<const GroundTruthObject> gts) {
  ClassCounts c;
  for (const auto& g : gts) {
    if (g.difficult) {
      ++c.difficult;
    } else {
      ++c[g.label];
    }
  }
  return c;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : cells) {
    for (auto v : row) n += v;
  }
  return n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (std::size_t r = 0; r <= kNumClasses; ++r) {
    for (std::size_t c = 0; c <= kNumClasses; ++c) cells[r][c] += other.cells[r][c];
  }
  return *this;
}

ConfusionMatrix confusion(const MatchResult& match, std::span<const Detection> dets,
                          std::span<const GroundTruthObject> gts) {
  check_indices(match, dets.size(), gts.size());
  ConfusionMatrix m;
  for (const auto& p : match.pairs) {
    const auto& g = gts[p.ground_truth];
    if (g.difficult) continue;
    ++m.at(index_of(g.label), index_of(dets[p.detection].label));
  }
  for (auto i : match.unmatched_ground_truth) {
    if (!gts[i].difficult) ++m.at(index_of(gts[i].label), ConfusionMatrix::kExtra);
  }
  for (auto i : match.unmatched_detections) {
    ++m.at(ConfusionMatrix::kExtra, index_of(dets[i].label));
  }
  return m;
}

std::optional<double> AccuracyTally::value() const {
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(total);
}

AccuracyTally accuracy_tally(const MatchResult& match, std::span<const Detection> dets,
                             std::span<const GroundTruthObject> gts,
                             const std::set<CellClass>& excluded) {
  check_indices(match, dets.size(), gts.size());
  auto counted = [&](const GroundTruthObject& g) { return !g.difficult && !excluded.contains(g.label); };
  AccuracyTally t;
  for (const auto& g : gts) {
    if (counted(g)) ++t.total;
  }
  for (const auto& p : match.pairs) {
    const auto& g = gts[p.ground_truth];
    if (counted(g) && dets[p.detection].label == g.label) ++t.correct;
  }
  return t;
}

std::optional<double> accuracy_excluding(const MatchResult& match, std::span<const Detection> dets,
                                         std::span<const GroundTruthObject> gts,
                                         const std::set<CellClass>& excluded) {
  return accuracy_tally(match, dets, gts, excluded).value();
}

double ClassScore::precision() const {
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double ClassScore::recall() const {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

std::optional<double> ClassScore::f1() const {
  if (!applicable()) return std::nullopt;
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

ClassScores& operator+=(ClassScores& a, const ClassScores& b) {
  for (std::size_t k = 0; k < kNumClasses; ++k) a[k] += b[k];
  return a;
}

ClassScores per_class_f1(const MatchResult& match, std::span<const Detection> dets,
                         std::span<const GroundTruthObject> gts) {
  check_indices(match, dets.size(), gts.size());
  ClassScores s{};
  std::vector<bool> det_tp(dets.size(), false), det_ignored(dets.size(), false);
  std::vector<bool> gt_tp(gts.size(), false);
  for (const auto& p : match.pairs) {
    const auto& g = gts[p.ground_truth];
    if (g.difficult) {
      det_ignored[p.detection] = true;
      continue;
    }
    if (dets[p.detection].label == g.label) {
      det_tp[p.detection] = true;
      gt_tp[p.ground_truth] = true;
      ++s[index_of(g.label)].tp;
    }
  }
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (!det_tp[i] && !det_ignored[i]) ++s[index_of(dets[i].label)].fp;
  }
  for (std::size_t j = 0; j < gts.size(); ++j) {
    if (!gt_tp[j] && !gts[j].difficult) ++s[index_of(gts[j].label)].fn;
  }
  return s;
}

AgreementReport annotator_agreement(const Dataset& a, const Dataset& b, double threshold) {
  std::set<std::string> ids_a, ids_b;
  for (const auto& r : a.records) ids_a.insert(r.id);
  for (const auto& r : b.records) ids_b.insert(r.id);
  if (ids_a != ids_b) throw std::invalid_argument("annotation sets cover different image ids");

  AgreementReport out;
  for (const auto& ra : a.records) {
    const auto& rb = *b.find(ra.id);
    const auto ca = count_objects(ra.objects);
    const auto cb = count_objects(rb.objects);
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      out.counts_a.per_class[k] += ca.per_class[k];
      out.counts_b.per_class[k] += cb.per_class[k];
    }
    out.counts_a.difficult += ca.difficult;
    out.counts_b.difficult += cb.difficult;

    const auto ref = non_difficult(ra.objects);
    const auto cand = non_difficult(rb.objects);
    std::vector<BoundingBox> boxes;
    std::vector<Detection> as_dets;
    for (const auto& o : cand) {
      boxes.push_back(o.box);
      as_dets.push_back({o.box, o.label, 1.0});
    }
    const auto m = match_by_best_overlap(boxes, ref, threshold);
    out.matched += m.pairs.size();
    for (const auto& p : m.pairs) {
      if (as_dets[p.detection].label != ref[p.ground_truth].label) ++out.label_disagreements;
    }
    out.scores += per_class_f1(m, as_dets, ref);
  }
  return out;
}

}  // namespace smear
