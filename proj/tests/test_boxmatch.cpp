#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "smear/boxmatch.hpp"

using namespace smear;

namespace {

std::vector<GroundTruthObject> as_gts(const std::vector<BoundingBox>& boxes) {
  std::vector<GroundTruthObject> out;
  for (const auto& b : boxes) out.push_back({b, CellClass::rbc, false});
  return out;
}

void check_invariants(const MatchResult& m, std::size_t n_det, std::size_t n_gt, double threshold,
                      const std::vector<BoundingBox>& dets, const std::vector<GroundTruthObject>& gts) {
  std::set<std::size_t> seen_d, seen_g;
  for (const auto& p : m.pairs) {
    CHECK(seen_d.insert(p.detection).second);
    CHECK(seen_g.insert(p.ground_truth).second);
    CHECK(p.iou > threshold);
    CHECK(p.iou == iou(dets[p.detection], gts[p.ground_truth].box));
  }
  for (auto d : m.unmatched_detections) CHECK(seen_d.insert(d).second);
  for (auto g : m.unmatched_ground_truth) CHECK(seen_g.insert(g).second);
  CHECK(seen_d.size() == n_det);
  CHECK(seen_g.size() == n_gt);
  if (!seen_d.empty()) CHECK(*seen_d.rbegin() == n_det - 1);
  if (!seen_g.empty()) CHECK(*seen_g.rbegin() == n_gt - 1);
  for (auto d : m.unmatched_detections) {
    for (auto g : m.unmatched_ground_truth) CHECK(iou(dets[d], gts[g].box) <= threshold);
  }
}

}  // namespace

TEST_CASE("iou basic values") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(iou({0, 0, 10, 10}, {20, 20, 30, 30}) == 0.0);
  CHECK(iou({0, 0, 10, 10}, {10, 0, 20, 10}) == 0.0);
  CHECK(iou({0, 0, 10, 10}, {5, 0, 15, 10}) == doctest::Approx(50.0 / 150.0).epsilon(1e-15));
  CHECK(oracle::raster_iou({0, 0, 10, 10}, {5, 0, 15, 10}, 0.05) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("iou is symmetric, bounded and agrees with the raster oracle") {
  Rng rng(42);
  for (int i = 0; i < 300; ++i) {
    const auto a = oracle::random_box(rng, 100, 1, 60);
    const auto b = oracle::random_box(rng, 100, 1, 60);
    const double v = iou(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == iou(b, a));
    CHECK(iou(a, a) == 1.0);
    CHECK(std::abs(v - oracle::raster_iou(a, b, 0.25)) <= 1e-2);
  }
}

TEST_CASE("best-overlap matching cases") {
  const std::vector<BoundingBox> none;
  const auto gts = as_gts({{0, 0, 10, 10}, {20, 20, 30, 30}});
  const auto empty = match_by_best_overlap(none, gts);
  CHECK(empty.pairs.empty());
  CHECK(empty.unmatched_ground_truth == std::vector<std::size_t>{0, 1});

  // 0.39 and 0.41 around the threshold: width overlap o gives o / (20 - o).
  const auto g = as_gts({{0, 0, 10, 10}});
  const double o39 = 20 * 0.39 / 1.39;
  const std::vector<BoundingBox> near{{10 - o39, 0, 20 - o39, 10}};
  CHECK(iou(near[0], g[0].box) == doctest::Approx(0.39));
  CHECK(match_by_best_overlap(near, g).pairs.empty());

  // Two objects on one gt at 0.8 and 0.6; the 0.6 one listed first.
  const double o6 = 20 * 0.6 / 1.6, o8 = 20 * 0.8 / 1.8;
  const std::vector<BoundingBox> two{{10 - o6, 0, 20 - o6, 10}, {10 - o8, 0, 20 - o8, 10}};
  const auto m = match_by_best_overlap(two, g);
  REQUIRE(m.pairs.size() == 1);
  CHECK(m.pairs[0].detection == 1);
  CHECK(m.pairs[0].iou == doctest::Approx(0.8));
  CHECK(m.unmatched_detections == std::vector<std::size_t>{0});
}

TEST_CASE("iou exactly at the threshold does not match") {
  const auto g = as_gts({{0, 0, 10, 10}});
  const std::vector<BoundingBox> half{{0, 0, 10, 5}};
  CHECK(iou(half[0], g[0].box) == 0.5);
  CHECK(match_by_best_overlap(half, g, 0.5).pairs.empty());
  CHECK(match_by_best_overlap(half, g, 0.49).pairs.size() == 1);
}

TEST_CASE("scored matching cases") {
  const auto g = as_gts({{0, 0, 10, 10}});
  const std::vector<Detection> one{{{0, 0, 10, 5}, CellClass::ring, 0.3}};
  CHECK(match_detections(one, g).pairs.size() == 1);

  // Lower-score detection overlaps better but the higher score claims first.
  const std::vector<Detection> two{{{0, 0, 10, 10}, CellClass::rbc, 0.8}, {{0, 0, 10, 6}, CellClass::rbc, 0.9}};
  const auto m = match_detections(two, g);
  REQUIRE(m.pairs.size() == 1);
  CHECK(m.pairs[0].detection == 1);
  CHECK(m.unmatched_detections == std::vector<std::size_t>{0});

  const std::vector<Detection> far{{{50, 50, 60, 60}, CellClass::rbc, 0.99}};
  const auto f = match_detections(far, g);
  CHECK(f.pairs.empty());
  CHECK(f.unmatched_detections == std::vector<std::size_t>{0});
}

TEST_CASE("scored matching picks the highest-iou free gt") {
  const auto gts = as_gts({{0, 0, 10, 10}, {2, 0, 12, 10}});
  const std::vector<Detection> d{{{2, 0, 12, 10}, CellClass::rbc, 0.9}, {{0, 0, 10, 10}, CellClass::rbc, 0.5}};
  const auto m = match_detections(d, gts);
  REQUIRE(m.pairs.size() == 2);
  CHECK(m.pairs[0] == MatchPair{0, 1, 1.0});
  CHECK(m.pairs[1] == MatchPair{1, 0, 1.0});
}

TEST_CASE("threshold must lie in (0, 1)") {
  const std::vector<BoundingBox> none;
  CHECK_THROWS_AS(match_by_best_overlap(none, {}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(match_detections({}, {}, 1.0), std::invalid_argument);
}

TEST_CASE("randomized matching invariants") {
  Rng rng(9);
  for (int scene = 0; scene < 100; ++scene) {
    std::vector<BoundingBox> boxes;
    std::vector<Detection> dets;
    const auto nd = rng.uniform_int(0, 15), ng = rng.uniform_int(0, 15);
    for (std::int64_t i = 0; i < nd; ++i) {
      boxes.push_back(oracle::random_box(rng, 80, 4, 25));
      dets.push_back({boxes.back(), CellClass::rbc, std::round(rng.uniform() * 4) / 4});
    }
    std::vector<GroundTruthObject> gts;
    for (std::int64_t i = 0; i < ng; ++i) gts.push_back({oracle::random_box(rng, 80, 4, 25), CellClass::rbc, false});
    const double thr = rng.uniform(0.1, 0.7);
    const auto a = match_by_best_overlap(boxes, gts, thr);
    check_invariants(a, boxes.size(), gts.size(), thr, boxes, gts);
    const auto b = match_detections(dets, gts, thr);
    check_invariants(b, boxes.size(), gts.size(), thr, boxes, gts);
    CHECK(match_by_best_overlap(boxes, gts, thr) == a);
    CHECK(match_detections(dets, gts, thr) == b);
  }
}
