#include "smear/pipeline.hpp"

#include <filesystem>

#include <opencv2/imgcodecs.hpp>

#include "json_io.hpp"

namespace smear {

std::string_view to_string(CoarseLabel c) { return c == CoarseLabel::rbc ? "rbc" : "other"; }

std::vector<StageOneRecord> parse_stage_one(std::string_view text) {
  auto entries = detail::read_image_entries(text);
  std::vector<StageOneRecord> out;
  for (std::size_t i = 0; i < entries.images.size(); ++i) {
    const auto& image = entries.images[i];
    auto h = detail::read_header(image, i);
    StageOneRecord r{h.id, h.width, h.height, h.path, {}};
    if (image.contains("objects")) {
      const auto& objs = image["objects"];
      if (!objs.is_array()) throw FormatError("image '" + h.id + "': \"objects\" must be an array");
      for (std::size_t k = 0; k < objs.size(); ++k) {
        const auto& o = objs[k];
        StageOneDetection d;
        d.box = detail::read_box(o, h.id, k);
        if (!d.box.inside(r.width, r.height)) {
          throw FormatError(detail::object_error(h.id, k, "box out of image bounds"));
        }
        if (!o.contains("label") || !o["label"].is_string()) {
          throw FormatError(detail::object_error(h.id, k, "missing string \"label\""));
        }
        const auto name = o["label"].get<std::string>();
        if (name == "rbc") {
          d.label = CoarseLabel::rbc;
        } else if (name == "other" || parse_cell_class(name)) {
          d.label = CoarseLabel::other;
        } else {
          throw FormatError(detail::object_error(h.id, k, "unknown stage-one label '" + name + "'"));
        }
        if (!o.contains("score") || !o["score"].is_number()) {
          throw FormatError(detail::object_error(h.id, k, "missing numeric \"score\""));
        }
        d.score = o["score"].get<double>();
        if (!(d.score >= 0.0 && d.score <= 1.0)) {
          throw FormatError(detail::object_error(h.id, k, "score outside [0, 1]"));
        }
        r.detections.push_back(d);
      }
    }
    for (const auto& prev : out) {
      if (prev.id == r.id) throw FormatError("duplicate image id '" + r.id + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string serialize_stage_one(const std::vector<StageOneRecord>& records) {
  std::vector<detail::json> images;
  for (const auto& r : records) {
    detail::json j;
    j["id"] = r.id;
    j["width"] = r.width;
    j["height"] = r.height;
    j["path"] = r.path;
    detail::json objs = detail::json::array();
    for (const auto& d : r.detections) {
      objs.push_back({{"bbox", detail::box_to_json(d.box)},
                      {"label", std::string(to_string(d.label))},
                      {"score", d.score}});
    }
    j["objects"] = std::move(objs);
    images.push_back(std::move(j));
  }
  return detail::write_entries(images);
}

std::vector<Detection> two_stage_classify(const std::vector<StageOneDetection>& stage1,
                                          const cv::Mat& image, const ForestModel& classifier) {
  std::vector<Detection> out;
  out.reserve(stage1.size());
  for (const auto& s : stage1) {
    if (s.label == CoarseLabel::rbc) {
      out.push_back({s.box, CellClass::rbc, s.score});
      continue;
    }
    if (!classifier.trained()) throw std::logic_error("stage-two classifier is not trained");
    if (!s.box.inside(image.cols, image.rows)) {
      throw std::invalid_argument("stage-one box outside the image");
    }
    const auto f = extract_features(image, s.box);
    const auto p = classifier.predict(f);
    out.push_back({s.box, p.label, s.score * p.probability_of(p.label, classifier.classes())});
  }
  return out;
}

std::vector<Detection> run_baseline(const cv::Mat& image, const ForestModel& model,
                                    const SegmentParams& params) {
  if (!model.trained()) throw std::logic_error("baseline model is not trained");
  const auto seg = segment(image, params);
  std::vector<Detection> out;
  out.reserve(seg.objects.size());
  for (const auto& obj : seg.objects) {
    const auto f = extract_features(image, obj);
    const auto p = model.predict(f);
    out.push_back({obj.box, p.label, p.probability_of(p.label, model.classes())});
  }
  return out;
}

TrainingSet baseline_training_set(const Dataset& d, const ImageLoader& load,
                                  const BaselineParams& params) {
  TrainingSet out;
  for (const auto& r : d.records) {
    const cv::Mat image = load(r);
    const auto seg = segment(image, params.segmentation);
    std::vector<BoundingBox> boxes;
    boxes.reserve(seg.objects.size());
    for (const auto& o : seg.objects) boxes.push_back(o.box);
    const auto m = match_by_best_overlap(boxes, r.objects, params.iou_threshold);
    for (const auto& pair : m.pairs) {
      const auto& gt = r.objects[pair.ground_truth];
      if (gt.difficult) continue;
      const auto f = extract_features(image, seg.objects[pair.detection]);
      out.X.emplace_back(f.begin(), f.end());
      out.y.push_back(gt.label);
    }
  }
  return out;
}

TrainingSet stage_two_training_set(const Dataset& d, const ImageLoader& load,
                                   bool include_difficult) {
  TrainingSet out;
  for (const auto& r : d.records) {
    const bool wanted = std::any_of(r.objects.begin(), r.objects.end(), [&](const auto& o) {
      return o.label != CellClass::rbc && (include_difficult || !o.difficult);
    });
    if (!wanted) continue;
    const cv::Mat image = load(r);
    for (const auto& o : r.objects) {
      if (o.label == CellClass::rbc || (o.difficult && !include_difficult)) continue;
      const auto f = extract_features(image, o.box);
      out.X.emplace_back(f.begin(), f.end());
      out.y.push_back(o.label);
    }
  }
  return out;
}

ImageLoader file_loader(std::string root) {
  return [root = std::move(root)](const ImageRecord& r) {
    std::filesystem::path p(r.path);
    if (p.is_relative()) p = std::filesystem::path(root) / p;
    cv::Mat image = cv::imread(p.string(), cv::IMREAD_COLOR);
    if (image.empty()) throw std::runtime_error("cannot read image '" + p.string() + "'");
    if (image.cols != r.width || image.rows != r.height) {
      throw std::runtime_error("image '" + r.id + "' size does not match its annotation");
    }
    return image;
  };
}

}  // namespace smear
