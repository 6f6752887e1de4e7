#pragma once

// Shared helpers for the image-keyed JSON files (annotations, detections,
// stage-one detections). Internal to the library.

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "smear/dataset.hpp"

namespace smear::detail {

using nlohmann::json;

struct ImageEntries {
  std::vector<json> images;
  std::string split;  // empty unless the wrapper form was used
};

/// Accepts a JSON array, a {"split", "images"} wrapper, or JSON Lines.
ImageEntries read_image_entries(std::string_view text);

struct ImageHeader {
  std::string id;
  int width = 0;
  int height = 0;
  std::string path;
};

ImageHeader read_header(const json& image, std::size_t position);
BoundingBox read_box(const json& obj, const std::string& image_id, std::size_t index);
std::string object_error(const std::string& image_id, std::size_t index, std::string_view what);

json box_to_json(const BoundingBox& b);

/// Writes `[\n<entry>,\n<entry>\n]\n`, one compact image per line.
std::string write_entries(const std::vector<json>& images);

}  // namespace smear::detail
