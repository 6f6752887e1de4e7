#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "smear/dataset.hpp"

namespace smear {

/// Clockwise quarter turns applied to a crop.
enum class Orientation : std::uint8_t { deg0 = 0, deg90 = 1, deg180 = 2, deg270 = 3 };

int degrees(Orientation o);

struct Crop {
  std::string source_id;
  int origin_x = 0;
  int origin_y = 0;
  int size = 448;
  std::vector<GroundTruthObject> objects;  // crop-local coordinates
  Orientation orientation = Orientation::deg0;

  friend bool operator==(const Crop&, const Crop&) = default;
};

struct CropParams {
  int size = 448;
  double multiplier = 2.0;
  int max_crops = 100;
};

/// Random square crops until the cells they contain add up to
/// multiplier * |objects|, or max_crops is reached. A cell belongs to a crop
/// when its box center lies in [origin, origin + size); its box is clipped to
/// the crop. Always emits at least one crop.
std::vector<Crop> generate_crops(const ImageRecord& record, const CropParams& params,
                                 std::uint64_t seed);

/// Number of objects the crops contain in total.
std::size_t contained_cells(const std::vector<Crop>& crops);

struct BalanceOptions {
  // Whether a difficult non-rbc object makes its crop rotate like a clean one.
  bool difficult_triggers_rotation = true;
};

/// Drops empty and rbc-only crops; every crop holding a non-rbc object is
/// emitted at 0, 90, 180 and 270 degrees.
std::vector<Crop> balance_crops(const std::vector<Crop>& crops, const BalanceOptions& opts = {});

/// One clockwise quarter turn inside a size x size frame: (x, y) -> (size - y, x).
BoundingBox rotate_box_cw(const BoundingBox& b, double size);
BoundingBox rotate_box(const BoundingBox& b, double size, Orientation o);

/// Crop pixels (origin, size) out of the source image and apply the crop's
/// orientation. The same quarter-turn map as rotate_box applies to pixels.
cv::Mat extract_crop_pixels(const cv::Mat& source, const Crop& crop);

/// Crop objects as an ImageRecord in crop-local coordinates.
ImageRecord crop_record(const Crop& crop, std::string id, std::string path);

// ---------------------------------------------------------------------------
// Per-cell augmentation

struct AugmentConfig {
  int variants = 8;
  bool rotate = true;          // quarter turns
  bool flip = true;            // horizontal and/or vertical
  int max_shift = 0;           // pixels, horizontal and vertical
  int max_channel_shift = 0;   // added per channel, clamped to [0, 255]
  double max_scale_delta = 0;  // scale factor drawn from [1 - d, 1 + d]
};

/// Transforms applied to one variant, in application order.
struct AppliedTransforms {
  int quarter_turns = 0;
  bool flip_horizontal = false;
  bool flip_vertical = false;
  int shift_x = 0;
  int shift_y = 0;
  std::vector<int> channel_shift;  // empty when not applied
  double scale = 1.0;

  bool identity() const;
};

struct AugmentedPatch {
  cv::Mat image;
  AppliedTransforms transforms;
};

std::vector<AugmentedPatch> augment_cell(const cv::Mat& patch, std::uint64_t seed,
                                         const AugmentConfig& config);

/// Applies exactly the listed transforms.
cv::Mat apply_transforms(const cv::Mat& patch, const AppliedTransforms& t);

cv::Mat flip_horizontal(const cv::Mat& patch);
cv::Mat flip_vertical(const cv::Mat& patch);
cv::Mat rotate_quarter_turns(const cv::Mat& patch, int turns);
/// Translates content by (dx, dy); uncovered pixels replicate the nearest edge.
cv::Mat shift_replicate(const cv::Mat& patch, int dx, int dy);
/// Adds a constant per channel with saturation to [0, 255].
cv::Mat shift_channels(const cv::Mat& patch, const std::vector<int>& deltas);
/// Scales about the patch center with nearest-neighbor sampling; output keeps
/// the input size and samples outside the source replicate the edge.
cv::Mat scale_nearest(const cv::Mat& patch, double factor);

}  // namespace smear
