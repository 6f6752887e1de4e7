#include <doctest.h>

#include "oracles.hpp"
#include "smear/metrics.hpp"
#include "smear/report.hpp"

using namespace smear;

namespace {

GroundTruthObject gt(double x, CellClass c, bool difficult = false) { return {{x, 0, x + 10, 10}, c, difficult}; }
Detection det(double x, CellClass c, double score = 0.9) { return {{x, 0, x + 10, 10}, c, score}; }

ClassCounts counts(std::array<std::size_t, kNumClasses> per_class, std::size_t difficult) {
  ClassCounts c;
  c.per_class = per_class;
  c.difficult = difficult;
  return c;
}

// Indexed rbc, leukocyte, gametocyte, ring, trophozoite, schizont.
const ClassCounts kFig5Model = counts({19561, 23, 20, 4, 521, 6}, 0);
const ClassCounts kFig5Matched = counts({19181, 30, 76, 81, 538, 26}, 217);
const ClassCounts kFig5Truth = counts({19604, 28, 75, 88, 561, 28}, 218);
const ClassCounts kFig6Model = counts({19112, 49, 74, 227, 664, 39}, 0);
const ClassCounts kFig8A = counts({0, 28, 75, 88, 561, 28}, 218);
const ClassCounts kFig8B = counts({0, 23, 242, 40, 437, 98}, 119);

}  // namespace

TEST_CASE("counting objects") {
  CHECK(count_objects(std::vector<Detection>{}).total() == 0);
  const std::vector<GroundTruthObject> rings{gt(0, CellClass::ring), gt(20, CellClass::ring), gt(40, CellClass::ring)};
  CHECK(count_objects(rings)[CellClass::ring] == 3);
  const std::vector<Detection> dets{det(0, CellClass::ring), det(0, CellClass::ring), det(50, CellClass::rbc)};
  CHECK(count_objects(dets)[CellClass::ring] == 2);
}

TEST_CASE("counting reproduces the ground-truth column") {
  std::vector<GroundTruthObject> objs;
  for (auto c : kAllClasses) {
    for (std::size_t k = 0; k < kFig5Truth[c]; ++k) objs.push_back(gt(0, c));
  }
  for (std::size_t k = 0; k < 218; ++k) objs.push_back(gt(0, kAllClasses[k % kNumClasses], true));
  CHECK(count_objects(objs) == kFig5Truth);
}

TEST_CASE("confusion bookkeeping") {
  SUBCASE("perfect matching is diagonal") {
    const std::vector<GroundTruthObject> g{gt(0, CellClass::ring), gt(20, CellClass::rbc)};
    const std::vector<Detection> d{det(20, CellClass::rbc), det(0, CellClass::ring)};
    const auto cm = confusion(match_detections(d, g), d, g);
    for (std::size_t r = 0; r <= kNumClasses; ++r) {
      for (std::size_t c = 0; c <= kNumClasses; ++c) {
        const std::size_t want = (r == c && (r == index_of(CellClass::ring) || r == index_of(CellClass::rbc))) ? 1 : 0;
        CHECK(cm.at(r, c) == want);
      }
    }
  }
  SUBCASE("ring detected as trophozoite") {
    const std::vector<GroundTruthObject> g{gt(0, CellClass::ring)};
    const std::vector<Detection> d{det(0, CellClass::trophozoite)};
    const auto cm = confusion(match_detections(d, g), d, g);
    CHECK(cm.at(index_of(CellClass::ring), index_of(CellClass::trophozoite)) == 1);
    CHECK(cm.total() == 1);
  }
  SUBCASE("missed and spurious margins") {
    const std::vector<GroundTruthObject> g{gt(0, CellClass::ring), gt(20, CellClass::schizont), gt(40, CellClass::rbc)};
    const std::vector<Detection> d{det(0, CellClass::ring), det(20, CellClass::schizont), det(100, CellClass::gametocyte)};
    const auto m = match_detections(d, g);
    const auto cm = confusion(m, d, g);
    CHECK(cm.missed(CellClass::rbc) == 1);
    CHECK(cm.spurious(CellClass::gametocyte) == 1);
    CHECK(cm.at(index_of(CellClass::ring), index_of(CellClass::ring)) == 1);
    CHECK(cm.at(index_of(CellClass::schizont), index_of(CellClass::schizont)) == 1);
    CHECK(cm.total() == 4);
    CHECK(cm.total() == m.pairs.size() + m.unmatched_ground_truth.size() + m.unmatched_detections.size());
  }
  SUBCASE("difficult ground truth is left out") {
    const std::vector<GroundTruthObject> g{gt(0, CellClass::ring, true), gt(40, CellClass::ring, true)};
    const std::vector<Detection> d{det(0, CellClass::ring)};
    CHECK(confusion(match_detections(d, g), d, g).total() == 0);
  }
  SUBCASE("inconsistent match results are rejected") {
    const std::vector<GroundTruthObject> g{gt(0, CellClass::ring)};
    const std::vector<Detection> d{det(0, CellClass::ring)};
    MatchResult bad;
    bad.pairs.push_back({0, 3, 0.9});
    CHECK_THROWS_AS(confusion(bad, d, g), std::invalid_argument);
  }
}

TEST_CASE("accuracy micro-fixtures") {
  // 4 counted gts: 2 correct, 1 mislabeled, 1 missed; rbc and difficult ignored.
  const std::vector<GroundTruthObject> g{gt(0, CellClass::ring),        gt(20, CellClass::schizont),
                                         gt(40, CellClass::trophozoite), gt(60, CellClass::gametocyte),
                                         gt(80, CellClass::rbc),        gt(100, CellClass::ring, true)};
  const std::vector<Detection> d{det(0, CellClass::ring), det(20, CellClass::schizont),
                                 det(40, CellClass::ring), det(80, CellClass::ring),
                                 det(100, CellClass::ring), det(300, CellClass::ring)};
  const auto m = match_detections(d, g);
  const auto acc = accuracy_excluding(m, d, g);
  REQUIRE(acc);
  CHECK(*acc == 0.5);

  const std::vector<Detection> perfect{det(0, CellClass::ring), det(20, CellClass::schizont),
                                       det(40, CellClass::trophozoite), det(60, CellClass::gametocyte)};
  CHECK(accuracy_excluding(match_detections(perfect, g), perfect, g) == 1.0);

  const std::vector<GroundTruthObject> only_rbc{gt(0, CellClass::rbc), gt(20, CellClass::ring, true)};
  CHECK_FALSE(accuracy_excluding(match_detections(perfect, only_rbc), perfect, only_rbc));
}

TEST_CASE("f1 micro-fixtures") {
  const std::vector<GroundTruthObject> ref{gt(0, CellClass::ring), gt(20, CellClass::ring)};
  const std::vector<Detection> cand{det(0, CellClass::ring)};
  const auto s = per_class_f1(match_detections(cand, ref), cand, ref);
  const auto& ring = s[index_of(CellClass::ring)];
  CHECK(ring.precision() == 1.0);
  CHECK(ring.recall() == 0.5);
  CHECK(*ring.f1() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK_FALSE(s[index_of(CellClass::leukocyte)].f1());

  const std::vector<Detection> same{det(0, CellClass::ring), det(20, CellClass::ring)};
  CHECK(*per_class_f1(match_detections(same, ref), same, ref)[index_of(CellClass::ring)].f1() == 1.0);

  const std::vector<Detection> wrong{det(0, CellClass::schizont)};
  const auto w = per_class_f1(match_detections(wrong, ref), wrong, ref);
  CHECK(*w[index_of(CellClass::ring)].f1() == 0.0);
  CHECK(*w[index_of(CellClass::schizont)].f1() == 0.0);
}

TEST_CASE("annotator agreement") {
  Dataset a, b;
  a.records.push_back({"x", 200, 20, "x.png", {gt(0, CellClass::ring), gt(50, CellClass::rbc), gt(100, CellClass::leukocyte, true)}});
  b = a;
  const auto same = annotator_agreement(a, b);
  CHECK(*same.scores[index_of(CellClass::ring)].f1() == 1.0);
  CHECK(*same.scores[index_of(CellClass::rbc)].f1() == 1.0);
  CHECK_FALSE(same.scores[index_of(CellClass::leukocyte)].f1());
  CHECK(same.counts_a.difficult == 1);
  CHECK(same.matched == 2);

  b.records[0].objects[0].label = CellClass::gametocyte;
  const auto diff = annotator_agreement(a, b);
  CHECK(*diff.scores[index_of(CellClass::ring)].f1() == 0.0);
  CHECK(*diff.scores[index_of(CellClass::gametocyte)].f1() == 0.0);
  CHECK(diff.label_disagreements == 1);
  CHECK(diff.matched == 2);

  Dataset other = b;
  other.records[0].id = "y";
  CHECK_THROWS_AS(annotator_agreement(a, other), std::invalid_argument);
}

TEST_CASE("randomized mass balance, accuracy cross-check and f1 symmetry") {
  Rng rng(31);
  for (int scene = 0; scene < 200; ++scene) {
    std::vector<GroundTruthObject> g;
    std::vector<Detection> d;
    const auto ng = rng.uniform_int(0, 12), nd = rng.uniform_int(0, 12);
    auto label = [&] { return kAllClasses[static_cast<std::size_t>(rng.uniform_int(0, 5))]; };
    for (std::int64_t i = 0; i < ng; ++i) g.push_back({oracle::random_box(rng, 60, 5, 20), label(), rng.bernoulli(0.15)});
    for (std::int64_t i = 0; i < nd; ++i) d.push_back({oracle::random_box(rng, 60, 5, 20), label(), rng.uniform()});
    const auto m = match_detections(d, g);
    const auto cm = confusion(m, d, g);
    std::size_t non_difficult = 0;
    for (const auto& o : g) non_difficult += !o.difficult;
    CHECK(cm.total() == non_difficult + m.unmatched_detections.size());

    std::size_t diag = 0, rows = 0;
    for (auto c : kAllClasses) {
      if (c == CellClass::rbc) continue;
      diag += cm.at(index_of(c), index_of(c));
      for (std::size_t k = 0; k <= kNumClasses; ++k) rows += cm.at(index_of(c), k);
    }
    const auto acc = accuracy_excluding(m, d, g);
    if (rows == 0) {
      CHECK_FALSE(acc);
    } else {
      REQUIRE(acc);
      CHECK(*acc == static_cast<double>(diag) / static_cast<double>(rows));
      CHECK(*acc >= 0.0);
      CHECK(*acc <= 1.0);
    }

    Dataset a, b;
    a.records.push_back({"s", 60, 60, "s.png", g});
    std::vector<GroundTruthObject> as_gt;
    for (const auto& x : d) as_gt.push_back({x.box, x.label, false});
    b.records.push_back({"s", 60, 60, "s.png", as_gt});
    const auto ab = annotator_agreement(a, b), ba = annotator_agreement(b, a);
    for (auto c : kAllClasses) CHECK(ab.scores[index_of(c)].f1() == ba.scores[index_of(c)].f1());

    auto rd = d;
    auto rg = g;
    std::reverse(rd.begin(), rd.end());
    std::reverse(rg.begin(), rg.end());
    const auto rm = match_detections(rd, rg);
    CHECK(confusion(rm, rd, rg) == cm);
    CHECK(accuracy_excluding(rm, rd, rg) == acc);
  }
}

TEST_CASE("count table of the baseline matches the published layout") {
  const CountTable t{{"Model Count", "Ground Truth Matched Count", "Ground Truth Count"},
                     {kFig5Model, kFig5Matched, kFig5Truth}, true, std::nullopt};
  const auto want = oracle::fixture("fig5.tsv");
  CHECK(render_count_table_tsv(t) == want);
  CHECK(parse_count_table(want) == t);
  CHECK(render_count_table_tsv(parse_count_table(render_count_table_csv(t))) == want);
}

TEST_CASE("count table of the one-stage model matches the published layout") {
  const CountTable t{{"Model Count", "Ground Truth Count"}, {kFig6Model, kFig5Truth}, true, std::nullopt};
  CHECK(render_count_table_tsv(t) == oracle::fixture("fig6a.tsv"));
}

TEST_CASE("annotator table matches the published layout") {
  CountTable t{{"Annotator 1 Count", "Annotator 2 Count"}, {kFig8A, kFig8B}, false,
               std::array<std::optional<double>, kNumClasses>{}};
  auto& f1 = *t.f1_percent;
  f1[index_of(CellClass::trophozoite)] = 82;
  f1[index_of(CellClass::schizont)] = 44;
  f1[index_of(CellClass::ring)] = 67;
  f1[index_of(CellClass::gametocyte)] = 63;
  f1[index_of(CellClass::leukocyte)] = 92;
  const auto want = oracle::fixture("fig8.tsv");
  CHECK(render_count_table_tsv(t) == want);
  CHECK(parse_count_table(want) == t);
  CHECK(render_count_table_csv(t).rfind("class,Annotator 1 Count,Annotator 2 Count,F1 score (%)\n", 0) == 0);
}

TEST_CASE("f1 percentages round to whole numbers") {
  CountTable t{{"A", "B"}, {counts({0, 0, 0, 2, 0, 0}, 0), counts({0, 0, 0, 1, 0, 0}, 0)}, false,
               std::array<std::optional<double>, kNumClasses>{}};
  (*t.f1_percent)[index_of(CellClass::ring)] = 100.0 * 2.0 / 3.0;
  CHECK(render_count_table_tsv(t).find("ring\t2\t1\t67\n") != std::string::npos);
}

TEST_CASE("confusion csv round-trips") {
  ConfusionMatrix m;
  for (std::size_t r = 0; r <= kNumClasses; ++r) {
    for (std::size_t c = 0; c <= kNumClasses; ++c) m.at(r, c) = r * 10 + c;
  }
  m.at(kNumClasses, kNumClasses) = 0;
  const auto text = render_confusion_csv(m);
  CHECK(text.rfind("ground_truth\\predicted,rbc,leukocyte,gametocyte,ring,trophozoite,schizont,missed\n", 0) == 0);
  CHECK(text.find("\nspurious,") != std::string::npos);
  CHECK(parse_confusion_csv(text) == m);
}

TEST_CASE("report bundle rendering") {
  CHECK_THROWS_AS(render_report({}), EmptyReportError);
  tsne::Embedding e;
  e.n = 3;
  e.y = {0, 0, 1, 1, -1, 2};
  e.labels = {"rbc", "ring", "difficult"};
  ReportBundle b;
  b.embedding = e;
  const auto files = render_report(b);
  REQUIRE(files.count("tsne.svg"));
  const auto& svg = files.at("tsne.svg");
  CHECK(svg.find("#1f77b4") != std::string::npos);
  CHECK(svg.find(">rbc</text>") != std::string::npos);
  CHECK(svg.find(">ring</text>") != std::string::npos);
  CHECK(svg.find(">difficult</text>") != std::string::npos);
  CHECK(render_report(b) == files);
  const auto back = read_coordinates_csv(files.at("tsne.csv"));
  CHECK(back.y == e.y);
  CHECK(back.labels == e.labels);
}
