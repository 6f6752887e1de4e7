#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "smear/segfeat.hpp"

using namespace smear;

namespace {

cv::Mat white(int w, int h) { return cv::Mat(h, w, CV_8UC3, cv::Scalar(240, 240, 240)); }

void dark_disk(cv::Mat& m, double cx, double cy, double r, cv::Vec3b color = {90, 40, 120}) {
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r) m.at<cv::Vec3b>(y, x) = color;
    }
  }
}

// Feature indices from the documented layout.
constexpr std::size_t kMeanR = 0, kStdR = 1, kArea = 18, kPerimeter = 19, kExtent = 20, kAspect = 21,
                      kCircularity = 22, kGradMeanR = 23;

}  // namespace

TEST_CASE("blank image has no objects") {
  const auto s = segment(white(64, 48));
  CHECK(s.objects.empty());
  CHECK_FALSE(s.warnings.empty());
  CHECK_FALSE(otsu_threshold(luminance(white(8, 8))));
}

TEST_CASE("three disjoint disks are found with their centroids") {
  cv::Mat m = white(200, 120);
  const std::array<cv::Point2d, 3> centers = {cv::Point2d(40.3, 30.7), {120, 60}, {60.5, 90.2}};
  for (const auto& c : centers) dark_disk(m, c.x, c.y, 12);
  const auto s = segment(m);
  REQUIRE(s.objects.size() == 3);
  // Objects come in scan order of their first pixel.
  const std::array<std::size_t, 3> order = {0, 1, 2};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto c = s.objects[k].centroid();
    CHECK(std::abs(c.x - centers[order[k]].x) <= 1.0);
    CHECK(std::abs(c.y - centers[order[k]].y) <= 1.0);
    CHECK(s.objects[k].area == s.objects[k].pixels.size());
  }
}

TEST_CASE("touching disks merge into one object") {
  cv::Mat m = white(160, 80);
  dark_disk(m, 50, 40, 15);
  dark_disk(m, 79, 40, 15);
  CHECK(segment(m).objects.size() == 1);
}

TEST_CASE("holes are filled and area limits apply") {
  cv::Mat m = white(100, 100);
  dark_disk(m, 50, 50, 20);
  dark_disk(m, 50, 50, 6, {240, 240, 240});
  dark_disk(m, 10, 10, 2);
  const auto s = segment(m, {30, 100000});
  REQUIRE(s.objects.size() == 1);
  std::size_t full = 0;
  for (int y = 0; y < 100; ++y) {
    for (int x = 0; x < 100; ++x) {
      const double dx = x + 0.5 - 50, dy = y + 0.5 - 50;
      full += dx * dx + dy * dy <= 400;
    }
  }
  CHECK(s.objects[0].area == full);
  CHECK(segment(m, {30, 100}).objects.empty());
}

TEST_CASE("segmentation moves with the image") {
  cv::Mat m = white(120, 100);
  dark_disk(m, 30, 30, 9);
  dark_disk(m, 70, 60, 11);
  cv::Mat shifted = white(120, 100);
  m(cv::Rect(0, 0, 110, 95)).copyTo(shifted(cv::Rect(10, 5, 110, 95)));
  const auto a = segment(m), b = segment(shifted);
  REQUIRE(a.objects.size() == b.objects.size());
  for (std::size_t k = 0; k < a.objects.size(); ++k) {
    CHECK(b.objects[k].box == BoundingBox{a.objects[k].box.xmin + 10, a.objects[k].box.ymin + 5,
                                          a.objects[k].box.xmax + 10, a.objects[k].box.ymax + 5});
    CHECK(b.objects[k].area == a.objects[k].area);
  }
}

TEST_CASE("otsu separates a two-level image") {
  cv::Mat g(10, 10, CV_8UC1, cv::Scalar(200));
  g(cv::Rect(0, 0, 5, 10)).setTo(50);
  const auto t = otsu_threshold(g);
  REQUIRE(t);
  CHECK(*t >= 50);
  CHECK(*t < 200);
}

TEST_CASE("uniform region has no spread and no gradient") {
  cv::Mat m(40, 40, CV_8UC3, cv::Scalar(10, 20, 30));
  const auto f = extract_features(m, BoundingBox{5, 5, 25, 25});
  for (int ch = 0; ch < 3; ++ch) {
    CHECK(f[6 * ch + 1] == 0.0);
    CHECK(f[23 + 4 * ch] == 0.0);
    CHECK(f[23 + 4 * ch + 3] == 0.0);
  }
  CHECK(f[kMeanR] == 30.0);  // R of a BGR (10, 20, 30) pixel
}

TEST_CASE("square mask geometry") {
  cv::Mat m = white(50, 50);
  for (int s : {1, 4, 9}) {
    const auto f = extract_features(m, BoundingBox{10, 10, 10.0 + s, 10.0 + s});
    CHECK(f[kArea] == s * s);
    CHECK(f[kPerimeter] == 4 * s);
    CHECK(f[kExtent] == 1.0);
    CHECK(f[kAspect] == 1.0);
    CHECK(f[kCircularity] == doctest::Approx(std::numbers::pi / 4).epsilon(1e-12));
  }
  const auto rect = extract_features(m, BoundingBox{0, 0, 8, 2});
  CHECK(rect[kAspect] == 4.0);
}

TEST_CASE("box regions cover pixels with centers inside") {
  const auto r = box_region({0.4, 0.6, 3.5, 2.4}, 10, 10);
  // x centers 0.5..2.5, y center 1.5 only.
  CHECK(r.area == 3);
  CHECK(r.box == BoundingBox{0, 1, 3, 2});
  CHECK_THROWS_AS(box_region({0, 0, 11, 5}, 10, 10), std::invalid_argument);
  CHECK_THROWS_AS(extract_features(white(10, 10), BoundingBox{2.1, 2.1, 2.4, 2.4}), std::invalid_argument);
}

TEST_CASE("brightness shift moves intensity levels and leaves the rest") {
  cv::Mat m = white(80, 80);
  dark_disk(m, 40, 40, 15, {60, 30, 90});
  for (int y = 25; y < 55; ++y) {
    for (int x = 25; x < 55; ++x) {
      auto& px = m.at<cv::Vec3b>(y, x);
      if (px[0] < 200) px += cv::Vec3b((x * 3) % 11, (y * 5) % 13, (x + y) % 7);
    }
  }
  const auto seg = segment(m);
  REQUIRE(seg.objects.size() == 1);
  const auto& obj = seg.objects[0];
  const int k = 17;
  cv::Mat brighter = m.clone();
  for (const auto& p : obj.pixels) brighter.at<cv::Vec3b>(p) += cv::Vec3b(k, k, k);
  const auto a = extract_features(m, obj), b = extract_features(brighter, obj);
  for (int ch = 0; ch < 3; ++ch) {
    CHECK(b[6 * ch + 0] == doctest::Approx(a[6 * ch + 0] + k).epsilon(1e-12));
    CHECK(b[6 * ch + 1] == doctest::Approx(a[6 * ch + 1]).epsilon(1e-12));
    CHECK(b[6 * ch + 2] == a[6 * ch + 2] + k);
    CHECK(b[6 * ch + 3] == a[6 * ch + 3] + k);
    CHECK(b[6 * ch + 4] == a[6 * ch + 4] + k);
    CHECK(b[6 * ch + 5] == doctest::Approx(a[6 * ch + 5]).epsilon(1e-12));
    CHECK(b[23 + 4 * ch] == a[23 + 4 * ch]);
    CHECK(b[23 + 4 * ch + 3] == a[23 + 4 * ch + 3]);
  }
  for (std::size_t i = kArea; i <= kCircularity; ++i) CHECK(b[i] == a[i]);
  CHECK(a[kGradMeanR] > 0);
  CHECK(a[kStdR] > 0);
}

TEST_CASE("features are finite for random regions") {
  smear::Rng rng(12);
  cv::Mat m(60, 60, CV_8UC3);
  for (int y = 0; y < 60; ++y) {
    for (int x = 0; x < 60; ++x) {
      m.at<cv::Vec3b>(y, x) = cv::Vec3b(static_cast<uchar>(rng.uniform_int(0, 255)),
                                        static_cast<uchar>(rng.uniform_int(0, 255)),
                                        static_cast<uchar>(rng.uniform_int(0, 255)));
    }
  }
  CHECK(feature_names().size() == kFeatureDim);
  for (int i = 0; i < 100; ++i) {
    const auto b = oracle::random_box(rng, 60, 1, 30);
    const auto f = extract_features(m, b);
    for (double v : f) CHECK(std::isfinite(v));
    CHECK(f == extract_features(m, b));
  }
  cv::Mat gray(60, 60, CV_8UC1, cv::Scalar(77));
  const auto g = extract_features(gray, BoundingBox{1, 1, 5, 5});
  CHECK(g[0] == 77.0);
  CHECK(g[6] == 77.0);
}
