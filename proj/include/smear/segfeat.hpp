#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <opencv2/core.hpp>

#include "smear/dataset.hpp"

namespace smear {

/// One 8-connected foreground component. Pixels are sorted row-major.
struct SegmentedObject {
  std::vector<cv::Point> pixels;
  BoundingBox box;  // pixel-edge aligned: [min_x, min_y, max_x + 1, max_y + 1]
  std::size_t area = 0;

  cv::Point2d centroid() const;
};

struct SegmentParams {
  std::size_t min_area = 20;
  std::size_t max_area = 100000;
};

struct Segmentation {
  std::vector<SegmentedObject> objects;
  std::vector<std::string> warnings;
};

/// 8-bit luminance (single channel passes through; 3-channel input is BGR).
cv::Mat luminance(const cv::Mat& image);

/// Otsu threshold on a 256-bin histogram: the value t maximizing between-class
/// variance of {<= t} vs {> t}. Empty when the image has a single gray level.
std::optional<int> otsu_threshold(const cv::Mat& gray);

/// Dark-foreground Otsu segmentation with hole filling; components outside
/// [min_area, max_area] are dropped. Objects are ordered by their first pixel
/// in row-major scan order.
Segmentation segment(const cv::Mat& image, const SegmentParams& params = {});

// Fixed 35-value layout:
//   [0, 18)  per channel (R, G, B): mean, std, min, max, median, mean abs deviation
//   [18, 23) area, perimeter, extent, aspect ratio, circularity
//   [23, 35) per channel (R, G, B): gradient magnitude mean, gradient magnitude std,
//            5-bin intensity entropy (bits), high-frequency energy (mean squared Laplacian)
inline constexpr std::size_t kFeatureDim = 35;

using FeatureVector = std::array<double, kFeatureDim>;

const std::array<std::string_view, kFeatureDim>& feature_names();

using Region = std::variant<SegmentedObject, BoundingBox>;

/// Features of one region. A box region covers every pixel whose center lies
/// inside the box. Perimeter counts mask-boundary pixel edges; circularity is
/// 4*pi*area / perimeter^2.
FeatureVector extract_features(const cv::Mat& image, const Region& region);

/// Pixel mask for a box: all pixels with centers inside, clipped to the image.
SegmentedObject box_region(const BoundingBox& box, int width, int height);

}  // namespace smear
