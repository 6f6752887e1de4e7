#include "smear/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json_io.hpp"
#include "smear/rng.hpp"

namespace smear {

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "rbc", "leukocyte", "gametocyte", "ring", "trophozoite", "schizont"};

}  // namespace

std::string_view to_string(CellClass c) { return kClassNames[index_of(c)]; }

std::optional<CellClass> parse_cell_class(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kClassNames[i] == name) return kAllClasses[i];
  }
  return std::nullopt;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unsplit: break;
  }
  return "unsplit";
}

std::optional<Split> parse_split(std::string_view name) {
  for (Split s : {Split::unsplit, Split::train, Split::val, Split::test}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

const ImageRecord* Dataset::find(std::string_view id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

const DetectionRecord* DetectionSet::find(std::string_view id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

namespace detail {

ImageEntries read_image_entries(std::string_view text) {
  ImageEntries out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return out;

  if (text[first] == '[' || text[first] == '{') {
    json doc;
    bool whole_document = true;
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      // A leading '{' may also start a JSON Lines file.
      if (text[first] == '[') throw FormatError(std::string("malformed JSON: ") + e.what());
      whole_document = false;
    }
    if (whole_document) {
      if (doc.is_array()) {
        out.images.assign(doc.begin(), doc.end());
        return out;
      }
      if (doc.is_object() && doc.contains("images")) {
        if (!doc["images"].is_array()) throw FormatError("\"images\" must be an array");
        out.images.assign(doc["images"].begin(), doc["images"].end());
        if (doc.contains("split")) {
          if (!doc["split"].is_string()) throw FormatError("\"split\" must be a string");
          out.split = doc["split"].get<std::string>();
        }
        return out;
      }
      out.images.push_back(std::move(doc));
      return out;
    }
  }

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      try {
        out.images.push_back(json::parse(line));
      } catch (const json::parse_error& e) {
        throw FormatError("malformed JSON on line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    pos = end + 1;
  }
  return out;
}

std::string object_error(const std::string& image_id, std::size_t index, std::string_view what) {
  return "image '" + image_id + "' object " + std::to_string(index) + ": " + std::string(what);
}

ImageHeader read_header(const json& image, std::size_t position) {
  const std::string where = "image entry " + std::to_string(position);
  if (!image.is_object()) throw FormatError(where + ": expected an object");
  ImageHeader h;
  if (!image.contains("id") || !image["id"].is_string()) {
    throw FormatError(where + ": missing string \"id\"");
  }
  h.id = image["id"].get<std::string>();
  const std::string named = "image '" + h.id + "'";
  for (const char* key : {"width", "height"}) {
    if (!image.contains(key) || !image[key].is_number_integer()) {
      throw FormatError(named + ": missing integer \"" + key + "\"");
    }
  }
  const auto w = image["width"].get<std::int64_t>();
  const auto ht = image["height"].get<std::int64_t>();
  if (w <= 0 || ht <= 0 || w > INT32_MAX || ht > INT32_MAX) {
    throw FormatError(named + ": width and height must be positive");
  }
  h.width = static_cast<int>(w);
  h.height = static_cast<int>(ht);
  if (image.contains("path")) {
    if (!image["path"].is_string()) throw FormatError(named + ": \"path\" must be a string");
    h.path = image["path"].get<std::string>();
  }
  return h;
}

BoundingBox read_box(const json& obj, const std::string& image_id, std::size_t index) {
  if (!obj.is_object()) throw FormatError(object_error(image_id, index, "expected an object"));
  if (!obj.contains("bbox") || !obj["bbox"].is_array() || obj["bbox"].size() != 4) {
    throw FormatError(object_error(image_id, index, "\"bbox\" must be [xmin, ymin, xmax, ymax]"));
  }
  std::array<double, 4> v{};
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& e = obj["bbox"][k];
    if (!e.is_number()) throw FormatError(object_error(image_id, index, "non-numeric bbox"));
    v[k] = e.get<double>();
    if (!std::isfinite(v[k])) throw FormatError(object_error(image_id, index, "non-finite bbox"));
  }
  BoundingBox b{v[0], v[1], v[2], v[3]};
  if (!b.valid()) {
    throw FormatError(object_error(image_id, index, "degenerate box (need xmin < xmax, ymin < ymax)"));
  }
  return b;
}

json box_to_json(const BoundingBox& b) { return json::array({b.xmin, b.ymin, b.xmax, b.ymax}); }

std::string write_entries(const std::vector<json>& images) {
  std::string out = "[\n";
  for (std::size_t i = 0; i < images.size(); ++i) {
    out += images[i].dump();
    if (i + 1 < images.size()) out += ',';
    out += '\n';
  }
  out += "]\n";
  return out;
}

}  // namespace detail

namespace {

using detail::json;

CellClass read_label(const json& obj, const std::string& image_id, std::size_t index) {
  if (!obj.contains("label") || !obj["label"].is_string()) {
    throw FormatError(detail::object_error(image_id, index, "missing string \"label\""));
  }
  const auto name = obj["label"].get<std::string>();
  const auto c = parse_cell_class(name);
  if (!c) throw FormatError(detail::object_error(image_id, index, "unknown class '" + name + "'"));
  return *c;
}

void check_in_bounds(const BoundingBox& b, int w, int h, const std::string& id, std::size_t index) {
  if (!b.inside(w, h)) throw FormatError(detail::object_error(id, index, "box out of image bounds"));
}

template <typename Records>
void check_unique_ids(const Records& records) {
  std::set<std::string_view> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.id).second) throw FormatError("duplicate image id '" + r.id + "'");
  }
}

json header_json(const std::string& id, int w, int h, const std::string& path) {
  json j;
  j["id"] = id;
  j["width"] = w;
  j["height"] = h;
  j["path"] = path;
  return j;
}

}  // namespace

Dataset parse_dataset(std::string_view text) {
  auto entries = detail::read_image_entries(text);
  Dataset d;
  if (!entries.split.empty()) {
    const auto s = parse_split(entries.split);
    if (!s) throw FormatError("unknown split tag '" + entries.split + "'");
    d.split = *s;
  }
  d.records.reserve(entries.images.size());
  for (std::size_t i = 0; i < entries.images.size(); ++i) {
    const auto& image = entries.images[i];
    auto h = detail::read_header(image, i);
    ImageRecord r{h.id, h.width, h.height, h.path, {}};
    if (image.contains("objects")) {
      const auto& objs = image["objects"];
      if (!objs.is_array()) throw FormatError("image '" + h.id + "': \"objects\" must be an array");
      for (std::size_t k = 0; k < objs.size(); ++k) {
        const auto& o = objs[k];
        GroundTruthObject g;
        g.box = detail::read_box(o, h.id, k);
        g.label = read_label(o, h.id, k);
        if (o.contains("difficult")) {
          if (!o["difficult"].is_boolean()) {
            throw FormatError(detail::object_error(h.id, k, "\"difficult\" must be a boolean"));
          }
          g.difficult = o["difficult"].get<bool>();
        }
        check_in_bounds(g.box, r.width, r.height, h.id, k);
        r.objects.push_back(g);
      }
    }
    d.records.push_back(std::move(r));
  }
  check_unique_ids(d.records);
  return d;
}

std::string serialize_dataset(const Dataset& d) {
  std::vector<json> images;
  images.reserve(d.records.size());
  for (const auto& r : d.records) {
    json j = header_json(r.id, r.width, r.height, r.path);
    json objs = json::array();
    for (const auto& o : r.objects) {
      objs.push_back({{"bbox", detail::box_to_json(o.box)},
                      {"label", std::string(to_string(o.label))},
                      {"difficult", o.difficult}});
    }
    j["objects"] = std::move(objs);
    images.push_back(std::move(j));
  }
  if (d.split == Split::unsplit) return detail::write_entries(images);

  std::string out = "{\"split\":\"" + std::string(to_string(d.split)) + "\",\"images\":";
  out += detail::write_entries(images);
  out.pop_back();
  out += "}\n";
  return out;
}

DetectionSet parse_detections(std::string_view text) {
  auto entries = detail::read_image_entries(text);
  DetectionSet d;
  for (std::size_t i = 0; i < entries.images.size(); ++i) {
    const auto& image = entries.images[i];
    auto h = detail::read_header(image, i);
    DetectionRecord r{h.id, h.width, h.height, h.path, {}};
    if (image.contains("objects")) {
      const auto& objs = image["objects"];
      if (!objs.is_array()) throw FormatError("image '" + h.id + "': \"objects\" must be an array");
      for (std::size_t k = 0; k < objs.size(); ++k) {
        const auto& o = objs[k];
        Detection det;
        det.box = detail::read_box(o, h.id, k);
        det.label = read_label(o, h.id, k);
        if (!o.contains("score") || !o["score"].is_number()) {
          throw FormatError(detail::object_error(h.id, k, "missing numeric \"score\""));
        }
        det.score = o["score"].get<double>();
        if (!(det.score >= 0.0 && det.score <= 1.0)) {
          throw FormatError(detail::object_error(h.id, k, "score outside [0, 1]"));
        }
        check_in_bounds(det.box, r.width, r.height, h.id, k);
        r.detections.push_back(det);
      }
    }
    d.records.push_back(std::move(r));
  }
  check_unique_ids(d.records);
  return d;
}

std::string serialize_detections(const DetectionSet& d) {
  std::vector<json> images;
  for (const auto& r : d.records) {
    json j = header_json(r.id, r.width, r.height, r.path);
    json objs = json::array();
    for (const auto& det : r.detections) {
      objs.push_back({{"bbox", detail::box_to_json(det.box)},
                      {"label", std::string(to_string(det.label))},
                      {"score", det.score}});
    }
    j["objects"] = std::move(objs);
    images.push_back(std::move(j));
  }
  return detail::write_entries(images);
}

void validate(const Dataset& d) {
  for (const auto& r : d.records) {
    if (r.width <= 0 || r.height <= 0) throw FormatError("image '" + r.id + "': non-positive size");
    for (std::size_t k = 0; k < r.objects.size(); ++k) {
      const auto& b = r.objects[k].box;
      if (!b.valid()) throw FormatError(detail::object_error(r.id, k, "degenerate box"));
      check_in_bounds(b, r.width, r.height, r.id, k);
    }
  }
  check_unique_ids(d.records);
}

void validate(const DetectionSet& d) {
  for (const auto& r : d.records) {
    if (r.width <= 0 || r.height <= 0) throw FormatError("image '" + r.id + "': non-positive size");
    for (std::size_t k = 0; k < r.detections.size(); ++k) {
      const auto& det = r.detections[k];
      if (!det.box.valid()) throw FormatError(detail::object_error(r.id, k, "degenerate box"));
      if (!(det.score >= 0.0 && det.score <= 1.0)) {
        throw FormatError(detail::object_error(r.id, k, "score outside [0, 1]"));
      }
      check_in_bounds(det.box, r.width, r.height, r.id, k);
    }
  }
  check_unique_ids(d.records);
}

std::size_t ClassCounts::total() const {
  return std::accumulate(per_class.begin(), per_class.end(), std::size_t{0}) + difficult;
}

ClassDistribution class_distribution(const Dataset& d) {
  ClassDistribution out;
  for (const auto& r : d.records) {
    for (const auto& o : r.objects) {
      if (o.difficult) {
        ++out.counts.difficult;
      } else {
        ++out.counts[o.label];
      }
    }
  }
  const auto total = out.counts.total();
  if (total == 0) return out;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    out.fraction[i] = static_cast<double>(out.counts.per_class[i]) / static_cast<double>(total);
  }
  out.difficult_fraction = static_cast<double>(out.counts.difficult) / static_cast<double>(total);
  return out;
}

DatasetSplit split_dataset(const Dataset& d, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("val_fraction must lie in (0, 1)");
  }
  const auto n = d.records.size();
  if (n < 2) throw std::invalid_argument("cannot split a dataset with fewer than 2 records");

  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());

  std::vector<bool> is_val(n, false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;

  DatasetSplit out;
  out.train.split = Split::train;
  out.val.split = Split::val;
  for (std::size_t i = 0; i < n; ++i) {
    (is_val[i] ? out.val : out.train).records.push_back(d.records[i]);
  }
  return out;
}

}  // namespace smear
