#include "smear/cropgen.hpp"

#include <algorithm>
#include <stdexcept>

#include "smear/rng.hpp"

namespace smear {

int degrees(Orientation o) { return 90 * static_cast<int>(o); }

std::vector<Crop> generate_crops(const ImageRecord& record, const CropParams& params,
                                 std::uint64_t seed) {
  if (params.size <= 0 || params.max_crops < 1 || params.multiplier < 0) {
    throw std::invalid_argument("invalid crop parameters");
  }
  if (record.width < params.size || record.height < params.size) {
    throw std::invalid_argument("image '" + record.id + "' (" + std::to_string(record.width) + "x" +
                                std::to_string(record.height) + ") is smaller than the crop size " +
                                std::to_string(params.size));
  }

  const double target = params.multiplier * static_cast<double>(record.objects.size());
  const double s = params.size;
  Rng rng(seed);
  std::vector<Crop> crops;
  std::size_t covered = 0;
  do {
    Crop c;
    c.source_id = record.id;
    c.size = params.size;
    c.origin_x = static_cast<int>(rng.uniform_int(0, record.width - params.size));
    c.origin_y = static_cast<int>(rng.uniform_int(0, record.height - params.size));
    const double x0 = c.origin_x;
    const double y0 = c.origin_y;
    for (const auto& o : record.objects) {
      const double cx = o.box.center_x();
      const double cy = o.box.center_y();
      if (cx < x0 || cx >= x0 + s || cy < y0 || cy >= y0 + s) continue;
      GroundTruthObject local = o;
      local.box = {std::max(o.box.xmin - x0, 0.0), std::max(o.box.ymin - y0, 0.0),
                   std::min(o.box.xmax - x0, s), std::min(o.box.ymax - y0, s)};
      c.objects.push_back(local);
    }
    covered += c.objects.size();
    crops.push_back(std::move(c));
  } while (static_cast<double>(covered) < target &&
           crops.size() < static_cast<std::size_t>(params.max_crops));
  return crops;
}

std::size_t contained_cells(const std::vector<Crop>& crops) {
  std::size_t n = 0;
  for (const auto& c : crops) n += c.objects.size();
  return n;
}

BoundingBox rotate_box_cw(const BoundingBox& b, double size) {
  return {size - b.ymax, b.xmin, size - b.ymin, b.xmax};
}

BoundingBox rotate_box(const BoundingBox& b, double size, Orientation o) {
  BoundingBox out = b;
  for (int k = 0; k < static_cast<int>(o); ++k) out = rotate_box_cw(out, size);
  return out;
}

std::vector<Crop> balance_crops(const std::vector<Crop>& crops, const BalanceOptions& opts) {
  std::vector<Crop> out;
  for (const auto& c : crops) {
    if (c.orientation != Orientation::deg0) {
      throw std::invalid_argument("balance_crops expects unrotated crops");
    }
    const bool all_rbc = std::all_of(c.objects.begin(), c.objects.end(),
                                     [](const auto& o) { return o.label == CellClass::rbc; });
    if (all_rbc) continue;  // also drops empty crops

    const bool rare = std::any_of(c.objects.begin(), c.objects.end(), [&](const auto& o) {
      return o.label != CellClass::rbc && (opts.difficult_triggers_rotation || !o.difficult);
    });
    out.push_back(c);
    if (!rare) continue;
    for (auto o : {Orientation::deg90, Orientation::deg180, Orientation::deg270}) {
      Crop r = c;
      r.orientation = o;
      for (auto& obj : r.objects) obj.box = rotate_box(obj.box, c.size, o);
      out.push_back(std::move(r));
    }
  }
  return out;
}

cv::Mat extract_crop_pixels(const cv::Mat& source, const Crop& crop) {
  const cv::Rect roi(crop.origin_x, crop.origin_y, crop.size, crop.size);
  if ((roi & cv::Rect(0, 0, source.cols, source.rows)) != roi) {
    throw std::invalid_argument("crop of '" + crop.source_id + "' exceeds the source image");
  }
  return rotate_quarter_turns(source(roi), static_cast<int>(crop.orientation));
}

ImageRecord crop_record(const Crop& crop, std::string id, std::string path) {
  return {std::move(id), crop.size, crop.size, std::move(path), crop.objects};
}

}  // namespace smear
