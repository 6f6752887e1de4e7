#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "smear/cropgen.hpp"
#include "smear/rng.hpp"

namespace smear {

namespace {

void check_patch(const cv::Mat& patch) {
  if (patch.empty() || patch.rows == 0 || patch.cols == 0) {
    throw std::invalid_argument("degenerate (zero-dimension) patch");
  }
  if (patch.depth() != CV_8U) throw std::invalid_argument("augmentation expects 8-bit patches");
}

// Maps each output pixel to a source pixel, clamped to the patch (edge replication).
template <typename SourceOf>
cv::Mat remap_replicate(const cv::Mat& patch, SourceOf source_of) {
  cv::Mat out(patch.size(), patch.type());
  const int ch = patch.channels();
  for (int y = 0; y < patch.rows; ++y) {
    auto* dst = out.ptr<std::uint8_t>(y);
    for (int x = 0; x < patch.cols; ++x) {
      auto [sx, sy] = source_of(x, y);
      sx = std::clamp(sx, 0, patch.cols - 1);
      sy = std::clamp(sy, 0, patch.rows - 1);
      const auto* src = patch.ptr<std::uint8_t>(sy) + sx * ch;
      std::copy(src, src + ch, dst + x * ch);
    }
  }
  return out;
}

}  // namespace

bool AppliedTransforms::identity() const {
  const bool no_channel = std::all_of(channel_shift.begin(), channel_shift.end(),
                                      [](int d) { return d == 0; });
  return quarter_turns % 4 == 0 && !flip_horizontal && !flip_vertical && shift_x == 0 &&
         shift_y == 0 && no_channel && scale == 1.0;
}

cv::Mat flip_horizontal(const cv::Mat& patch) {
  check_patch(patch);
  cv::Mat out;
  cv::flip(patch, out, 1);
  return out;
}

cv::Mat flip_vertical(const cv::Mat& patch) {
  check_patch(patch);
  cv::Mat out;
  cv::flip(patch, out, 0);
  return out;
}

cv::Mat rotate_quarter_turns(const cv::Mat& patch, int turns) {
  check_patch(patch);
  cv::Mat out;
  switch (((turns % 4) + 4) % 4) {
    case 1: cv::rotate(patch, out, cv::ROTATE_90_CLOCKWISE); break;
    case 2: cv::rotate(patch, out, cv::ROTATE_180); break;
    case 3: cv::rotate(patch, out, cv::ROTATE_90_COUNTERCLOCKWISE); break;
    default: out = patch.clone(); break;
  }
  return out;
}

cv::Mat shift_replicate(const cv::Mat& patch, int dx, int dy) {
  check_patch(patch);
  return remap_replicate(patch, [&](int x, int y) { return std::pair{x - dx, y - dy}; });
}

cv::Mat shift_channels(const cv::Mat& patch, const std::vector<int>& deltas) {
  check_patch(patch);
  const int ch = patch.channels();
  if (static_cast<int>(deltas.size()) != ch) {
    throw std::invalid_argument("channel shift needs one delta per channel");
  }
  cv::Mat out = patch.clone();
  for (int y = 0; y < out.rows; ++y) {
    auto* row = out.ptr<std::uint8_t>(y);
    for (int x = 0; x < out.cols; ++x) {
      for (int c = 0; c < ch; ++c) {
        row[x * ch + c] = static_cast<std::uint8_t>(std::clamp(row[x * ch + c] + deltas[c], 0, 255));
      }
    }
  }
  return out;
}

cv::Mat scale_nearest(const cv::Mat& patch, double factor) {
  check_patch(patch);
  if (!(factor > 0.0)) throw std::invalid_argument("scale factor must be positive");
  const double cx = 0.5 * patch.cols;
  const double cy = 0.5 * patch.rows;
  return remap_replicate(patch, [&](int x, int y) {
    const double sx = (x + 0.5 - cx) / factor + cx;
    const double sy = (y + 0.5 - cy) / factor + cy;
    return std::pair{static_cast<int>(std::floor(sx)), static_cast<int>(std::floor(sy))};
  });
}

cv::Mat apply_transforms(const cv::Mat& patch, const AppliedTransforms& t) {
  check_patch(patch);
  cv::Mat out = patch.clone();
  if (t.quarter_turns % 4 != 0) out = rotate_quarter_turns(out, t.quarter_turns);
  if (t.flip_horizontal) out = flip_horizontal(out);
  if (t.flip_vertical) out = flip_vertical(out);
  if (t.scale != 1.0) out = scale_nearest(out, t.scale);
  if (t.shift_x != 0 || t.shift_y != 0) out = shift_replicate(out, t.shift_x, t.shift_y);
  if (!t.channel_shift.empty()) out = shift_channels(out, t.channel_shift);
  return out;
}

std::vector<AugmentedPatch> augment_cell(const cv::Mat& patch, std::uint64_t seed,
                                         const AugmentConfig& config) {
  check_patch(patch);
  if (config.variants < 0 || config.max_shift < 0 || config.max_channel_shift < 0 ||
      config.max_scale_delta < 0 || config.max_scale_delta >= 1) {
    throw std::invalid_argument("invalid augmentation config");
  }
  Rng rng(seed);
  std::vector<AugmentedPatch> out;
  out.reserve(config.variants);
  for (int v = 0; v < config.variants; ++v) {
    AppliedTransforms t;
    if (config.rotate) t.quarter_turns = static_cast<int>(rng.uniform_int(0, 3));
    if (config.flip) {
      t.flip_horizontal = rng.bernoulli(0.5);
      t.flip_vertical = rng.bernoulli(0.5);
    }
    if (config.max_scale_delta > 0) {
      t.scale = rng.uniform(1.0 - config.max_scale_delta, 1.0 + config.max_scale_delta);
    }
    if (config.max_shift > 0) {
      t.shift_x = static_cast<int>(rng.uniform_int(-config.max_shift, config.max_shift));
      t.shift_y = static_cast<int>(rng.uniform_int(-config.max_shift, config.max_shift));
    }
    if (config.max_channel_shift > 0) {
      for (int c = 0; c < patch.channels(); ++c) {
        t.channel_shift.push_back(
            static_cast<int>(rng.uniform_int(-config.max_channel_shift, config.max_channel_shift)));
      }
    }
    out.push_back({apply_transforms(patch, t), std::move(t)});
  }
  return out;
}

}  // namespace smear
