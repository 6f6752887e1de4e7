#include "smear/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>

#include "smear/rng.hpp"

namespace smear::synthetic {

namespace {

struct Bgr {
  double b, g, r;
};

constexpr Bgr kBackground{238, 234, 236};
constexpr Bgr kCytoplasm{150, 125, 195};  // pink erythrocyte
constexpr Bgr kParasite{135, 60, 115};     // Giemsa purple
constexpr Bgr kGametocyte{150, 90, 130};
constexpr Bgr kNucleus{112, 30, 70};

void blend(cv::Mat& image, int x, int y, const Bgr& c, double alpha) {
  if (x < 0 || y < 0 || x >= image.cols || y >= image.rows) return;
  auto* px = image.ptr<std::uint8_t>(y) + 3 * x;
  const double v[3] = {c.b, c.g, c.r};
  for (int k = 0; k < 3; ++k) {
    px[k] = static_cast<std::uint8_t>(std::clamp(std::lround((1 - alpha) * px[k] + alpha * v[k]), 0L, 255L));
  }
}

// Fills pixels whose centers satisfy inside(dx, dy) relative to (cx, cy).
template <typename Inside>
void fill(cv::Mat& image, double cx, double cy, double reach, const Bgr& c, Inside inside) {
  const int x0 = static_cast<int>(std::floor(cx - reach)), x1 = static_cast<int>(std::ceil(cx + reach));
  const int y0 = static_cast<int>(std::floor(cy - reach)), y1 = static_cast<int>(std::ceil(cy + reach));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (inside(dx, dy)) blend(image, x, y, c, 1.0);
    }
  }
}

void disk(cv::Mat& image, double cx, double cy, double r, const Bgr& c) {
  fill(image, cx, cy, r, c, [r](double dx, double dy) { return dx * dx + dy * dy <= r * r; });
}

}  // namespace

std::pair<double, double> radius_range(CellClass c) {
  switch (c) {
    case CellClass::rbc: return {10.5, 12.5};
    case CellClass::ring: return {11.0, 13.0};
    case CellClass::trophozoite: return {13.0, 15.0};
    case CellClass::schizont: return {14.5, 16.5};
    case CellClass::gametocyte: return {15.5, 17.5};
    case CellClass::leukocyte: return {18.0, 21.0};
  }
  return {10, 12};
}

cv::Mat blank_background(int width, int height) {
  return cv::Mat(height, width, CV_8UC3,
                 cv::Scalar(kBackground.b, kBackground.g, kBackground.r));
}

void draw_cell(cv::Mat& image, double cx, double cy, double radius, CellClass c, std::uint64_t seed) {
  if (image.type() != CV_8UC3) throw std::invalid_argument("draw_cell needs an 8-bit BGR image");
  Rng rng(seed);
  const double r = radius;
  switch (c) {
    case CellClass::rbc:
    case CellClass::ring:
    case CellClass::trophozoite:
    case CellClass::schizont: {
      disk(image, cx, cy, r, kCytoplasm);
      // Pale biconcave center.
      fill(image, cx, cy, 0.45 * r, Bgr{175, 160, 210},
           [&](double dx, double dy) { return dx * dx + dy * dy <= 0.2 * r * r; });
      break;
    }
    case CellClass::gametocyte:
      disk(image, cx, cy, r, kGametocyte);
      break;
    case CellClass::leukocyte:
      disk(image, cx, cy, r, Bgr{185, 165, 200});
      break;
  }

  const double angle = rng.uniform(0, 2 * std::numbers::pi);
  switch (c) {
    case CellClass::rbc:
      break;
    case CellClass::ring: {
      const double off = rng.uniform(0.2, 0.35) * r;
      const double rx = cx + off * std::cos(angle), ry = cy + off * std::sin(angle);
      const double outer = 0.38 * r, inner = 0.24 * r;
      fill(image, rx, ry, outer, kParasite, [&](double dx, double dy) {
        const double d2 = dx * dx + dy * dy;
        return d2 <= outer * outer && d2 >= inner * inner;
      });
      disk(image, rx + outer * std::cos(angle), ry + outer * std::sin(angle), 0.14 * r, kParasite);
      break;
    }
    case CellClass::trophozoite: {
      // Irregular amoeboid blob built from overlapping disks.
      for (int k = 0; k < 5; ++k) {
        const double a = angle + k * 1.3;
        const double d = rng.uniform(0.0, 0.3) * r;
        disk(image, cx + d * std::cos(a), cy + d * std::sin(a), rng.uniform(0.25, 0.35) * r, kParasite);
      }
      break;
    }
    case CellClass::schizont: {
      const int dots = static_cast<int>(rng.uniform_int(10, 14));
      for (int k = 0; k < dots; ++k) {
        const double a = rng.uniform(0, 2 * std::numbers::pi);
        const double d = std::sqrt(rng.uniform()) * 0.62 * r;
        disk(image, cx + d * std::cos(a), cy + d * std::sin(a), 0.13 * r, Bgr{110, 40, 85});
      }
      break;
    }
    case CellClass::gametocyte: {
      for (int k = 0; k < 25; ++k) {
        const double a = rng.uniform(0, 2 * std::numbers::pi);
        const double d = std::sqrt(rng.uniform()) * 0.85 * r;
        disk(image, cx + d * std::cos(a), cy + d * std::sin(a), 0.08 * r, Bgr{80, 70, 105});
      }
      break;
    }
    case CellClass::leukocyte: {
      // Multi-lobed nucleus.
      for (int k = 0; k < 3; ++k) {
        const double a = angle + k * 2.0 * std::numbers::pi / 3.0;
        disk(image, cx + 0.3 * r * std::cos(a), cy + 0.3 * r * std::sin(a), 0.38 * r, kNucleus);
      }
      break;
    }
  }
}

Scene make_scene(const std::string& id, const SceneParams& params, std::uint64_t seed) {
  Rng rng(seed);
  Scene s;
  s.image = blank_background(params.width, params.height);
  s.record.id = id;
  s.record.width = params.width;
  s.record.height = params.height;

  double total_mix = 0;
  for (double m : params.class_mix) total_mix += m;

  struct Placed {
    double x, y, r;
  };
  std::vector<Placed> placed;
  for (int k = 0; k < params.cells; ++k) {
    double u = rng.uniform() * total_mix;
    CellClass c = CellClass::rbc;
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      if (u < params.class_mix[i]) {
        c = kAllClasses[i];
        break;
      }
      u -= params.class_mix[i];
    }
    const auto [rlo, rhi] = radius_range(c);
    const double r = rng.uniform(rlo, rhi);
    bool ok = false;
    double x = 0, y = 0;
    for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
      x = rng.uniform(r + 1, params.width - r - 1);
      y = rng.uniform(r + 1, params.height - r - 1);
      ok = std::none_of(placed.begin(), placed.end(), [&](const Placed& p) {
        return std::hypot(p.x - x, p.y - y) < p.r + r + params.min_gap;
      });
    }
    if (!ok) continue;
    placed.push_back({x, y, r});
    draw_cell(s.image, x, y, r, c, rng.next());
    GroundTruthObject o;
    o.box = {std::max(0.0, x - r), std::max(0.0, y - r), std::min<double>(params.width, x + r),
             std::min<double>(params.height, y + r)};
    o.label = c;
    o.difficult = rng.bernoulli(params.difficult_fraction);
    s.record.objects.push_back(o);
  }

  if (params.noise_stddev > 0) {
    for (int y = 0; y < s.image.rows; ++y) {
      auto* row = s.image.ptr<std::uint8_t>(y);
      for (int x = 0; x < 3 * s.image.cols; ++x) {
        row[x] = static_cast<std::uint8_t>(
            std::clamp(std::lround(row[x] + rng.normal(0, params.noise_stddev)), 0L, 255L));
      }
    }
  }
  return s;
}

StageOneRecord simulate_stage_one(const ImageRecord& record, std::uint64_t seed) {
  Rng rng(seed);
  StageOneRecord out{record.id, record.width, record.height, record.path, {}};
  for (const auto& o : record.objects) {
    if (rng.bernoulli(0.04)) continue;  // missed
    StageOneDetection d;
    const double jx = rng.uniform(-1.5, 1.5), jy = rng.uniform(-1.5, 1.5);
    d.box = {std::clamp(o.box.xmin + jx, 0.0, record.width - 2.0),
             std::clamp(o.box.ymin + jy, 0.0, record.height - 2.0), 0, 0};
    d.box.xmax = std::clamp(o.box.xmax + jx, d.box.xmin + 1.0, static_cast<double>(record.width));
    d.box.ymax = std::clamp(o.box.ymax + jy, d.box.ymin + 1.0, static_cast<double>(record.height));
    d.label = o.label == CellClass::rbc ? CoarseLabel::rbc : CoarseLabel::other;
    if (rng.bernoulli(0.03)) d.label = d.label == CoarseLabel::rbc ? CoarseLabel::other : CoarseLabel::rbc;
    d.score = rng.uniform(0.6, 1.0);
    out.detections.push_back(d);
  }
  const int spurious = static_cast<int>(rng.uniform_int(0, 2));
  for (int k = 0; k < spurious; ++k) {
    const double s = rng.uniform(16, 30);
    const double x = rng.uniform(0, record.width - s), y = rng.uniform(0, record.height - s);
    out.detections.push_back({{x, y, x + s, y + s},
                              rng.bernoulli(0.5) ? CoarseLabel::rbc : CoarseLabel::other,
                              rng.uniform(0.3, 0.7)});
  }
  return out;
}

CorpusFiles write_corpus(const std::string& dir, int images, const SceneParams& params,
                         std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  Dataset d;
  std::vector<StageOneRecord> stage_one;
  for (int i = 0; i < images; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "field_%03d", i);
    auto scene = make_scene(id, params, mix_seed(seed, static_cast<std::uint64_t>(2 * i)));
    scene.record.path = std::string("images/") + id + ".png";
    const auto file = (fs::path(dir) / scene.record.path).string();
    if (!cv::imwrite(file, scene.image)) throw std::runtime_error("cannot write '" + file + "'");
    stage_one.push_back(simulate_stage_one(scene.record, mix_seed(seed, static_cast<std::uint64_t>(2 * i + 1))));
    d.records.push_back(std::move(scene.record));
  }
  CorpusFiles files{"gt.json", "stage1.json"};
  std::ofstream(fs::path(dir) / files.annotations, std::ios::binary) << serialize_dataset(d);
  std::ofstream(fs::path(dir) / files.stage_one, std::ios::binary) << serialize_stage_one(stage_one);
  return files;
}

}  // namespace smear::synthetic
