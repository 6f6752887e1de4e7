#include "smear/segfeat.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <stdexcept>

namespace smear {

namespace {

constexpr std::array<std::string_view, kFeatureDim> kFeatureNames = {
    "r_mean",      "r_std",        "r_min",       "r_max",      "r_median",    "r_mad",
    "g_mean",      "g_std",        "g_min",       "g_max",      "g_median",    "g_mad",
    "b_mean",      "b_std",        "b_min",       "b_max",      "b_median",    "b_mad",
    "area",        "perimeter",    "extent",      "aspect_ratio", "circularity",
    "r_grad_mean", "r_grad_std",   "r_entropy5",  "r_hf_energy",
    "g_grad_mean", "g_grad_std",   "g_entropy5",  "g_hf_energy",
    "b_grad_mean", "b_grad_std",   "b_entropy5",  "b_hf_energy"};

void check_image(const cv::Mat& image) {
  if (image.empty()) throw std::invalid_argument("empty image");
  if (image.depth() != CV_8U || (image.channels() != 1 && image.channels() != 3)) {
    throw std::invalid_argument("expected an 8-bit, 1- or 3-channel image");
  }
}

// Region mask over its bounding rectangle, for O(1) membership queries.
class LocalMask {
 public:
  explicit LocalMask(const std::vector<cv::Point>& pixels) {
    int x0 = pixels.front().x, x1 = x0, y0 = pixels.front().y, y1 = y0;
    for (const auto& p : pixels) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
    rect_ = cv::Rect(x0, y0, x1 - x0 + 1, y1 - y0 + 1);
    bits_.assign(static_cast<std::size_t>(rect_.area()), false);
    for (const auto& p : pixels) bits_[index(p.x, p.y)] = true;
  }

  bool contains(int x, int y) const {
    if (x < rect_.x || y < rect_.y || x >= rect_.x + rect_.width || y >= rect_.y + rect_.height) {
      return false;
    }
    return bits_[index(x, y)];
  }

  const cv::Rect& rect() const { return rect_; }

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y - rect_.y) * rect_.width + (x - rect_.x);
  }

  cv::Rect rect_;
  std::vector<bool> bits_;
};

struct Moments {
  double mean = 0, stddev = 0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.stddev = std::sqrt(ss / static_cast<double>(v.size()));
  return m;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Channel index in storage order for R, G, B.
int storage_channel(const cv::Mat& image, int rgb) {
  return image.channels() == 1 ? 0 : 2 - rgb;
}

double sample(const cv::Mat& image, int x, int y, int ch) {
  return image.ptr<std::uint8_t>(y)[x * image.channels() + ch];
}

}  // namespace

cv::Point2d SegmentedObject::centroid() const {
  cv::Point2d c(0, 0);
  for (const auto& p : pixels) {
    c.x += p.x + 0.5;
    c.y += p.y + 0.5;
  }
  if (!pixels.empty()) c *= 1.0 / static_cast<double>(pixels.size());
  return c;
}

cv::Mat luminance(const cv::Mat& image) {
  check_image(image);
  if (image.channels() == 1) return image.clone();
  cv::Mat gray(image.size(), CV_8UC1);
  for (int y = 0; y < image.rows; ++y) {
    const auto* src = image.ptr<std::uint8_t>(y);
    auto* dst = gray.ptr<std::uint8_t>(y);
    for (int x = 0; x < image.cols; ++x) {
      const int b = src[3 * x], g = src[3 * x + 1], r = src[3 * x + 2];
      dst[x] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
    }
  }
  return gray;
}

std::optional<int> otsu_threshold(const cv::Mat& gray) {
  std::array<double, 256> hist{};
  for (int y = 0; y < gray.rows; ++y) {
    const auto* row = gray.ptr<std::uint8_t>(y);
    for (int x = 0; x < gray.cols; ++x) hist[row[x]] += 1;
  }
  const double total = static_cast<double>(gray.total());
  double sum_all = 0;
  int levels = 0;
  for (int v = 0; v < 256; ++v) {
    sum_all += v * hist[v];
    if (hist[v] > 0) ++levels;
  }
  if (levels < 2) return std::nullopt;

  double w0 = 0, sum0 = 0, best = -1;
  int best_t = 0;
  for (int t = 0; t < 255; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return best_t;
}

Segmentation segment(const cv::Mat& image, const SegmentParams& params) {
  check_image(image);
  Segmentation out;
  const cv::Mat gray = luminance(image);
  const auto t = otsu_threshold(gray);
  if (!t) {
    out.warnings.push_back("constant image: no threshold, nothing segmented");
    return out;
  }

  const int w = gray.cols, h = gray.rows;
  auto at = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
  std::vector<std::uint8_t> fg(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y) {
    const auto* row = gray.ptr<std::uint8_t>(y);
    for (int x = 0; x < w; ++x) fg[at(x, y)] = row[x] <= *t ? 1 : 0;
  }

  // Fill holes: background not 4-reachable from the border becomes foreground.
  std::vector<std::uint8_t> outside(fg.size(), 0);
  std::deque<cv::Point> queue;
  auto seed_bg = [&](int x, int y) {
    if (!fg[at(x, y)] && !outside[at(x, y)]) {
      outside[at(x, y)] = 1;
      queue.emplace_back(x, y);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed_bg(x, 0);
    seed_bg(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed_bg(0, y);
    seed_bg(w - 1, y);
  }
  const std::array<cv::Point, 4> k4 = {cv::Point(1, 0), cv::Point(-1, 0), cv::Point(0, 1),
                                           cv::Point(0, -1)};
  while (!queue.empty()) {
    const auto p = queue.front();
    queue.pop_front();
    for (const auto& d : k4) {
      const int nx = p.x + d.x, ny = p.y + d.y;
      if (nx >= 0 && ny >= 0 && nx < w && ny < h) seed_bg(nx, ny);
    }
  }
  for (std::size_t i = 0; i < fg.size(); ++i) {
    if (!outside[i]) fg[i] = 1;
  }

  std::vector<std::uint8_t> seen(fg.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!fg[at(x, y)] || seen[at(x, y)]) continue;
      SegmentedObject obj;
      seen[at(x, y)] = 1;
      queue.emplace_back(x, y);
      while (!queue.empty()) {
        const auto p = queue.front();
        queue.pop_front();
        obj.pixels.push_back(p);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x + dx, ny = p.y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            if (fg[at(nx, ny)] && !seen[at(nx, ny)]) {
              seen[at(nx, ny)] = 1;
              queue.emplace_back(nx, ny);
            }
          }
        }
      }
      obj.area = obj.pixels.size();
      if (obj.area < params.min_area || obj.area > params.max_area) continue;
      std::sort(obj.pixels.begin(), obj.pixels.end(), [](const cv::Point& a, const cv::Point& b) {
        return a.y != b.y ? a.y < b.y : a.x < b.x;
      });
      const LocalMask mask(obj.pixels);
      const auto& r = mask.rect();
      obj.box = {static_cast<double>(r.x), static_cast<double>(r.y),
                 static_cast<double>(r.x + r.width), static_cast<double>(r.y + r.height)};
      out.objects.push_back(std::move(obj));
    }
  }
  return out;
}

const std::array<std::string_view, kFeatureDim>& feature_names() { return kFeatureNames; }

SegmentedObject box_region(const BoundingBox& box, int width, int height) {
  if (!box.valid()) throw std::invalid_argument("degenerate box region");
  if (!box.inside(width, height)) throw std::invalid_argument("box region outside the image");
  const int x0 = std::max(0, static_cast<int>(std::ceil(box.xmin - 0.5)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(box.ymin - 0.5)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(box.xmax - 0.5)) - 1);
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(box.ymax - 0.5)) - 1);
  SegmentedObject obj;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) obj.pixels.emplace_back(x, y);
  }
  obj.area = obj.pixels.size();
  if (obj.area > 0) {
    obj.box = {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 + 1),
               static_cast<double>(y1 + 1)};
  }
  return obj;
}

FeatureVector extract_features(const cv::Mat& image, const Region& region) {
  check_image(image);
  const SegmentedObject obj = std::holds_alternative<BoundingBox>(region)
                                  ? box_region(std::get<BoundingBox>(region), image.cols, image.rows)
                                  : std::get<SegmentedObject>(region);
  if (obj.pixels.empty()) throw std::invalid_argument("empty region");
  for (const auto& p : obj.pixels) {
    if (p.x < 0 || p.y < 0 || p.x >= image.cols || p.y >= image.rows) {
      throw std::invalid_argument("region pixel outside the image");
    }
  }

  const LocalMask mask(obj.pixels);
  const double n = static_cast<double>(obj.pixels.size());
  FeatureVector f{};

  // Neighbor lookups stay inside the region: outside pixels read as the center.
  auto value_or_self = [&](int x, int y, int cx, int cy, int ch) {
    return mask.contains(x, y) ? sample(image, x, y, ch) : sample(image, cx, cy, ch);
  };

  for (int rgb = 0; rgb < 3; ++rgb) {
    const int ch = storage_channel(image, rgb);
    std::vector<double> values, grads;
    values.reserve(obj.pixels.size());
    grads.reserve(obj.pixels.size());
    std::array<double, 5> bins{};
    double hf = 0;
    for (const auto& p : obj.pixels) {
      const double v = sample(image, p.x, p.y, ch);
      values.push_back(v);
      const double l = value_or_self(p.x - 1, p.y, p.x, p.y, ch);
      const double r = value_or_self(p.x + 1, p.y, p.x, p.y, ch);
      const double u = value_or_self(p.x, p.y - 1, p.x, p.y, ch);
      const double d = value_or_self(p.x, p.y + 1, p.x, p.y, ch);
      const double gx = 0.5 * (r - l);
      const double gy = 0.5 * (d - u);
      grads.push_back(std::sqrt(gx * gx + gy * gy));
      const double lap = l + r + u + d - 4.0 * v;
      hf += lap * lap;
      bins[std::min<std::size_t>(4, static_cast<std::size_t>(v * 5.0 / 256.0))] += 1;
    }

    const auto m = moments(values);
    double mad = 0;
    for (double v : values) mad += std::abs(v - m.mean);
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    double* block = f.data() + 6 * rgb;
    block[0] = m.mean;
    block[1] = m.stddev;
    block[2] = *lo;
    block[3] = *hi;
    block[4] = median(values);
    block[5] = mad / n;

    const auto gm = moments(grads);
    double entropy = 0;
    for (double b : bins) {
      if (b > 0) entropy -= (b / n) * std::log2(b / n);
    }
    double* tex = f.data() + 23 + 4 * rgb;
    tex[0] = gm.mean;
    tex[1] = gm.stddev;
    tex[2] = entropy + 0.0;  // normalizes -0
    tex[3] = hf / n;
  }

  double perimeter = 0;
  for (const auto& p : obj.pixels) {
    perimeter += !mask.contains(p.x - 1, p.y) + !mask.contains(p.x + 1, p.y) +
                 !mask.contains(p.x, p.y - 1) + !mask.contains(p.x, p.y + 1);
  }
  const auto& rect = mask.rect();
  f[18] = n;
  f[19] = perimeter;
  f[20] = n / static_cast<double>(rect.area());
  f[21] = static_cast<double>(rect.width) / static_cast<double>(rect.height);
  f[22] = 4.0 * std::numbers::pi * n / (perimeter * perimeter);
  return f;
}

}  // namespace smear
