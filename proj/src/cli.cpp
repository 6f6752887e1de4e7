#include "smear/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "smear/boxmatch.hpp"
#include "smear/cropgen.hpp"
#include "smear/csv.hpp"
#include "smear/dataset.hpp"
#include "smear/forest.hpp"
#include "smear/metrics.hpp"
#include "smear/pipeline.hpp"
#include "smear/report.hpp"
#include "smear/rng.hpp"
#include "smear/segfeat.hpp"
#include "smear/synthetic.hpp"
#include "smear/tsne.hpp"

namespace smear::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// A failure attributable to the inputs (bad file contents, unmet preconditions).
class ValidationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string parent_dir(const std::string& file) {
  const auto p = fs::path(file).parent_path();
  return p.empty() ? std::string(".") : p.string();
}

// Dumps every option of the subcommand (given or defaulted) as the run config.
void echo_config(const CLI::App& sub, const fs::path& out_dir) {
  json options = json::object();
  for (const auto* opt : sub.get_options()) {
    const auto& name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    if (opt->get_type_size() == 0) {
      options[name] = opt->count() > 0;
    } else if (opt->count() > 0) {
      const auto& r = opt->results();
      options[name] = r.size() == 1 ? json(r.front()) : json(r);
    } else {
      options[name] = opt->get_default_str();
    }
  }
  json config = {{"subcommand", sub.get_name()}, {"options", options}};
  write_file(out_dir / "run_config.json", config.dump(2) + "\n");
}

Dataset load_dataset(const std::string& path) {
  try {
    return parse_dataset(read_file(path));
  } catch (const FormatError& e) {
    throw ValidationFailure(path + ": " + e.what());
  }
}

DetectionSet load_detections(const std::string& path) {
  try {
    return parse_detections(read_file(path));
  } catch (const FormatError& e) {
    throw ValidationFailure(path + ": " + e.what());
  }
}

ForestModel load_forest(const std::string& path) {
  try {
    return load_model(read_file(path));
  } catch (const FormatError& e) {
    throw ValidationFailure(path + ": " + e.what());
  }
}

void print_counts(std::ostream& out, const ClassCounts& c) {
  for (auto k : kReportRowOrder) out << "  " << report_row_name(k) << ": " << c[k] << "\n";
  out << "  difficult: " << c.difficult << "\n";
}

json class_scores_json(const ClassScores& s) {
  json out = json::object();
  for (auto c : kAllClasses) {
    const auto& v = s[index_of(c)];
    json entry = {{"tp", v.tp}, {"fp", v.fp}, {"fn", v.fn}};
    if (v.applicable()) {
      entry["precision"] = v.precision();
      entry["recall"] = v.recall();
      entry["f1"] = *v.f1();
    } else {
      entry["precision"] = nullptr;
      entry["recall"] = nullptr;
      entry["f1"] = nullptr;
    }
    out[std::string(to_string(c))] = entry;
  }
  return out;
}

json match_json(const std::string& id, const MatchResult& m) {
  json pairs = json::array();
  for (const auto& p : m.pairs) pairs.push_back({p.detection, p.ground_truth, p.iou});
  return {{"id", id},
          {"pairs", pairs},
          {"unmatched_detections", m.unmatched_detections},
          {"unmatched_ground_truth", m.unmatched_ground_truth}};
}

// Options shared by subcommands that train forests.
struct ForestOptions {
  int trees = 1000;
  int max_depth = 0;
  int min_leaf = 1;
  int features_per_split = 0;
  std::string class_weights = "balanced";

  void add_to(CLI::App* app) {
    app->add_option("--trees", trees, "Number of trees")->check(CLI::PositiveNumber);
    app->add_option("--max-depth", max_depth, "Maximum tree depth (0 = unlimited)")->check(CLI::NonNegativeNumber);
    app->add_option("--min-leaf", min_leaf, "Minimum samples per leaf")->check(CLI::PositiveNumber);
    app->add_option("--features-per-split", features_per_split, "Features tried per split (0 = ceil(sqrt(D)))")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--class-weights", class_weights, "none | balanced")
        ->check(CLI::IsMember({"none", "balanced"}));
  }

  ForestParams params(std::uint64_t seed) const {
    ForestParams p;
    p.n_trees = trees;
    if (max_depth > 0) p.max_depth = max_depth;
    p.min_samples_leaf = min_leaf;
    if (features_per_split > 0) p.features_per_split = features_per_split;
    p.class_weights = class_weights == "balanced" ? ClassWeightMode::balanced : ClassWeightMode::none;
    p.seed = seed;
    return p;
  }
};

struct SegmentOptions {
  std::size_t min_area = 60;
  std::size_t max_area = 5000;

  void add_to(CLI::App* app) {
    app->add_option("--min-area", min_area, "Smallest kept component (pixels)");
    app->add_option("--max-area", max_area, "Largest kept component (pixels)");
  }
  SegmentParams params() const { return {min_area, max_area}; }
};

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(const std::vector<std::string>& args) {
    CLI::App app{"smeartk: blood-smear detection evaluation toolkit", "smeartk"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    add_validate(app);
    add_stats(app);
    add_split(app);
    add_crops(app);
    add_segment(app);
    add_features(app);
    add_train(app);
    add_classify(app);
    add_match(app);
    add_eval(app);
    add_agree(app);
    add_tsne(app);
    add_report(app);
    add_synth(app);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      out_ << app.help();
      return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
      out_ << app.help("", CLI::AppFormatMode::All);
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      err_ << "error: " << e.what() << "\n";
      if (!app.get_subcommands().empty()) err_ << app.get_subcommands().front()->help();
      return kExitUsage;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
      action_(*sub);
      return kExitOk;
    } catch (const ValidationFailure& e) {
      err_ << "validation failed: " << e.what() << "\n";
    } catch (const FormatError& e) {
      err_ << "validation failed: " << e.what() << "\n";
    } catch (const EmptyReportError& e) {
      err_ << "error: " << e.what() << "\n";
    } catch (const std::exception& e) {
      err_ << "error: " << e.what() << "\n";
    }
    return kExitFailure;
  }

 private:
  using Action = std::function<void(const CLI::App&)>;

  CLI::App* command(CLI::App& app, const std::string& name, const std::string& desc, Action action) {
    auto* sub = app.add_subcommand(name, desc);
    sub->callback([this, sub, action] { action_ = [action](const CLI::App& s) { action(s); }; (void)sub; });
    return sub;
  }

  void add_validate(CLI::App& app) {
    auto* s = command(app, "validate", "Check annotation / detection files", [this](const CLI::App&) {
      if (v_.annotations.empty() && v_.detections.empty() && v_.stage_one.empty()) {
        throw std::invalid_argument("give --annotations, --detections or --stage-one");
      }
      if (!v_.annotations.empty()) {
        const auto d = load_dataset(v_.annotations);
        const auto dist = class_distribution(d);
        out_ << v_.annotations << ": ok, " << d.records.size() << " images, " << dist.counts.total()
             << " objects\n";
        print_counts(out_, dist.counts);
      }
      if (!v_.detections.empty()) {
        const auto d = load_detections(v_.detections);
        std::size_t n = 0;
        ClassCounts c;
        for (const auto& r : d.records) {
          n += r.detections.size();
          const auto rc = count_objects(r.detections);
          for (std::size_t k = 0; k < kNumClasses; ++k) c.per_class[k] += rc.per_class[k];
        }
        out_ << v_.detections << ": ok, " << d.records.size() << " images, " << n << " detections\n";
        print_counts(out_, c);
      }
      if (!v_.stage_one.empty()) {
        std::vector<StageOneRecord> recs;
        try {
          recs = parse_stage_one(read_file(v_.stage_one));
        } catch (const FormatError& e) {
          throw ValidationFailure(v_.stage_one + ": " + e.what());
        }
        std::size_t n = 0;
        for (const auto& r : recs) n += r.detections.size();
        out_ << v_.stage_one << ": ok, " << recs.size() << " images, " << n << " stage-one detections\n";
      }
    });
    s->add_option("--annotations", v_.annotations, "Annotation file");
    s->add_option("--detections", v_.detections, "Detection file");
    s->add_option("--stage-one", v_.stage_one, "Stage-one detection file");
  }

  void add_stats(CLI::App& app) {
    auto* s = command(app, "stats", "Class distribution of an annotation file", [this](const CLI::App& sub) {
      const auto d = load_dataset(st_.annotations);
      const auto dist = class_distribution(d);
      std::string csv = "class,count,fraction\n";
      for (auto c : kReportRowOrder) {
        csv += report_row_name(c) + "," + std::to_string(dist.counts[c]) + "," + format_number(dist[c]) + "\n";
      }
      csv += "difficult," + std::to_string(dist.counts.difficult) + "," +
             format_number(dist.difficult_fraction) + "\n";
      csv += "total," + std::to_string(dist.counts.total()) + "," + (dist.empty() ? "0" : "1") + "\n";
      out_ << csv;
      if (!st_.out.empty()) {
        write_file(fs::path(st_.out) / "distribution.csv", csv);
        echo_config(sub, st_.out);
      }
    });
    s->add_option("--annotations", st_.annotations, "Annotation file")->required();
    s->add_option("--out", st_.out, "Output directory");
  }

  void add_split(CLI::App& app) {
    auto* s = command(app, "split", "Split images into train / validation", [this](const CLI::App& sub) {
      const auto d = load_dataset(sp_.annotations);
      const auto parts = split_dataset(d, sp_.val_fraction, sp_.seed);
      write_file(fs::path(sp_.out) / "train.json", serialize_dataset(parts.train));
      write_file(fs::path(sp_.out) / "val.json", serialize_dataset(parts.val));
      echo_config(sub, sp_.out);
      out_ << "train: " << parts.train.records.size() << " images, val: " << parts.val.records.size()
           << " images\n";
    });
    s->add_option("--annotations", sp_.annotations, "Annotation file")->required();
    s->add_option("--val-fraction", sp_.val_fraction, "Validation fraction in (0, 1)");
    s->add_option("--seed", sp_.seed, "Random seed");
    s->add_option("--out", sp_.out, "Output directory")->required();
  }

  void add_crops(CLI::App& app) {
    auto* s = command(app, "crops", "Generate balanced training crops", [this](const CLI::App& sub) {
      const auto d = load_dataset(cr_.annotations);
      const auto load = file_loader(parent_dir(cr_.annotations));
      const CropParams params{cr_.size, cr_.multiplier, cr_.max_crops};
      BalanceOptions balance;
      balance.difficult_triggers_rotation = !cr_.no_difficult_rotation;
      Dataset crops_out;
      std::size_t generated = 0;
      for (std::size_t i = 0; i < d.records.size(); ++i) {
        const auto& r = d.records[i];
        const cv::Mat image = load(r);
        auto crops = generate_crops(r, params, mix_seed(cr_.seed, i));
        generated += crops.size();
        if (!cr_.no_balance) crops = balance_crops(crops, balance);
        for (std::size_t k = 0; k < crops.size(); ++k) {
          const auto& c = crops[k];
          const std::string id = r.id + "_c" + std::to_string(k) + "_r" + std::to_string(degrees(c.orientation));
          const std::string rel = "crops/" + id + ".png";
          const auto path = fs::path(cr_.out) / rel;
          fs::create_directories(path.parent_path());
          if (!cv::imwrite(path.string(), extract_crop_pixels(image, c))) {
            throw std::runtime_error("cannot write '" + path.string() + "'");
          }
          crops_out.records.push_back(crop_record(c, id, rel));
        }
      }
      write_file(fs::path(cr_.out) / "crops.json", serialize_dataset(crops_out));
      echo_config(sub, cr_.out);
      out_ << "generated " << generated << " crops, kept " << crops_out.records.size() << "\n";
    });
    s->add_option("--annotations", cr_.annotations, "Annotation file")->required();
    s->add_option("--out", cr_.out, "Output directory")->required();
    s->add_option("--size", cr_.size, "Crop side length")->check(CLI::PositiveNumber);
    s->add_option("--multiplier", cr_.multiplier, "Coverage multiplier");
    s->add_option("--max-crops", cr_.max_crops, "Crop cap per image")->check(CLI::PositiveNumber);
    s->add_option("--seed", cr_.seed, "Random seed");
    s->add_flag("--no-balance", cr_.no_balance, "Skip rotation balancing and rbc-only removal");
    s->add_flag("--no-difficult-rotation", cr_.no_difficult_rotation,
                "Difficult non-rbc cells do not trigger rotation");
  }

  void add_segment(CLI::App& app) {
    auto* s = command(app, "segment", "Otsu segmentation of each image", [this](const CLI::App& sub) {
      const auto d = load_dataset(sg_.annotations);
      const auto load = file_loader(parent_dir(sg_.annotations));
      json images = json::array();
      for (const auto& r : d.records) {
        const auto seg = segment(load(r), sg_.seg.params());
        for (const auto& w : seg.warnings) err_ << "warning: " << r.id << ": " << w << "\n";
        json objs = json::array();
        std::vector<BoundingBox> boxes;
        for (const auto& o : seg.objects) {
          const auto c = o.centroid();
          objs.push_back({{"bbox", {o.box.xmin, o.box.ymin, o.box.xmax, o.box.ymax}},
                          {"area", o.area},
                          {"centroid", {c.x, c.y}}});
          boxes.push_back(o.box);
        }
        const auto m = match_by_best_overlap(boxes, r.objects, sg_.iou);
        images.push_back({{"id", r.id},
                          {"objects", objs},
                          {"matched_to_ground_truth", m.pairs.size()},
                          {"ground_truth", r.objects.size()}});
      }
      write_file(fs::path(sg_.out) / "segments.json", images.dump(1) + "\n");
      echo_config(sub, sg_.out);
      out_ << "segmented " << d.records.size() << " images\n";
    });
    s->add_option("--annotations", sg_.annotations, "Annotation file (image list)")->required();
    s->add_option("--out", sg_.out, "Output directory")->required();
    s->add_option("--iou", sg_.iou, "IoU threshold for matching to ground truth");
    sg_.seg.add_to(s);
  }

  void add_features(CLI::App& app) {
    auto* s = command(app, "features", "Hand-crafted features to CSV", [this](const CLI::App& sub) {
      const auto d = load_dataset(fe_.annotations);
      const auto load = file_loader(parent_dir(fe_.annotations));
      std::vector<FeatureRow> rows;
      for (const auto& r : d.records) {
        const cv::Mat image = load(r);
        if (fe_.source == "gt") {
          for (std::size_t k = 0; k < r.objects.size(); ++k) {
            const auto& o = r.objects[k];
            rows.push_back({r.id, k, o.box, extract_features(image, o.box),
                            o.difficult ? std::string("difficult") : std::string(to_string(o.label))});
          }
        } else {
          const auto seg = segment(image, fe_.seg.params());
          std::vector<BoundingBox> boxes;
          for (const auto& o : seg.objects) boxes.push_back(o.box);
          const auto m = match_by_best_overlap(boxes, r.objects, fe_.iou);
          std::vector<std::string> labels(boxes.size());
          for (const auto& p : m.pairs) {
            const auto& g = r.objects[p.ground_truth];
            labels[p.detection] = g.difficult ? "difficult" : std::string(to_string(g.label));
          }
          for (std::size_t k = 0; k < seg.objects.size(); ++k) {
            rows.push_back({r.id, k, seg.objects[k].box, extract_features(image, seg.objects[k]), labels[k]});
          }
        }
      }
      write_file(fs::path(fe_.out) / "features.csv", write_feature_csv(rows));
      echo_config(sub, fe_.out);
      out_ << "wrote " << rows.size() << " feature rows\n";
    });
    s->add_option("--annotations", fe_.annotations, "Annotation file")->required();
    s->add_option("--out", fe_.out, "Output directory")->required();
    s->add_option("--source", fe_.source, "gt (annotated boxes) | segment (segmented objects)")
        ->check(CLI::IsMember({"gt", "segment"}));
    s->add_option("--iou", fe_.iou, "IoU threshold for labeling segmented objects");
    fe_.seg.add_to(s);
  }

  void add_train(CLI::App& app) {
    auto* s = command(app, "train", "Train a random forest", [this](const CLI::App& sub) {
      TrainingSet ts;
      if (!tr_.features.empty()) {
        std::vector<FeatureRow> rows;
        try {
          rows = read_feature_csv(read_file(tr_.features));
        } catch (const FormatError& e) {
          throw ValidationFailure(tr_.features + ": " + e.what());
        }
        for (const auto& r : rows) {
          const auto c = parse_cell_class(r.label);
          if (!c) continue;  // unlabeled or difficult
          if (tr_.mode == "stage-two" && *c == CellClass::rbc) continue;
          ts.X.emplace_back(r.features.begin(), r.features.end());
          ts.y.push_back(*c);
        }
      } else if (!tr_.annotations.empty()) {
        const auto d = load_dataset(tr_.annotations);
        const auto load = file_loader(parent_dir(tr_.annotations));
        if (tr_.mode == "stage-two") {
          ts = stage_two_training_set(d, load, tr_.include_difficult);
        } else {
          BaselineParams bp;
          bp.segmentation = tr_.seg.params();
          bp.iou_threshold = tr_.iou;
          ts = baseline_training_set(d, load, bp);
        }
      } else {
        throw std::invalid_argument("give --annotations or --features");
      }
      if (ts.X.size() < 2) throw ValidationFailure("fewer than 2 training samples");
      const auto model = train_forest(ts.X, ts.y, tr_.forest.params(tr_.seed));
      write_file(fs::path(tr_.out) / "model.json", save_model(model));
      echo_config(sub, tr_.out);
      out_ << "trained " << model.trees().size() << " trees on " << ts.X.size() << " samples, "
           << model.classes().size() << " classes\n";
    });
    s->add_option("--annotations", tr_.annotations, "Annotation file");
    s->add_option("--features", tr_.features, "Labeled feature CSV (instead of --annotations)");
    s->add_option("--mode", tr_.mode, "stage-two | baseline")->check(CLI::IsMember({"stage-two", "baseline"}));
    s->add_option("--out", tr_.out, "Output directory")->required();
    s->add_option("--seed", tr_.seed, "Random seed");
    s->add_option("--iou", tr_.iou, "IoU threshold for matching segmented objects (baseline)");
    s->add_flag("--include-difficult", tr_.include_difficult, "Train stage two on difficult cells too");
    tr_.forest.add_to(s);
    tr_.seg.add_to(s);
  }

  void add_classify(CLI::App& app) {
    auto* s = command(app, "classify", "Fine-classify detections", [this](const CLI::App& sub) {
      const auto model = load_forest(cl_.model);
      DetectionSet out_set;
      if (!cl_.stage_one.empty()) {
        std::vector<StageOneRecord> recs;
        try {
          recs = parse_stage_one(read_file(cl_.stage_one));
        } catch (const FormatError& e) {
          throw ValidationFailure(cl_.stage_one + ": " + e.what());
        }
        const auto load = file_loader(parent_dir(cl_.stage_one));
        for (const auto& r : recs) {
          const ImageRecord header{r.id, r.width, r.height, r.path, {}};
          const auto dets = two_stage_classify(r.detections, load(header), model);
          out_set.records.push_back({r.id, r.width, r.height, r.path, dets});
        }
      } else if (!cl_.images.empty()) {
        const auto d = load_dataset(cl_.images);
        const auto load = file_loader(parent_dir(cl_.images));
        for (const auto& r : d.records) {
          out_set.records.push_back({r.id, r.width, r.height, r.path,
                                     run_baseline(load(r), model, cl_.seg.params())});
        }
      } else {
        throw std::invalid_argument("give --stage-one (two-stage) or --images (baseline)");
      }
      write_file(fs::path(cl_.out) / "detections.json", serialize_detections(out_set));
      echo_config(sub, cl_.out);
      std::size_t n = 0;
      for (const auto& r : out_set.records) n += r.detections.size();
      out_ << "classified " << n << " detections in " << out_set.records.size() << " images\n";
    });
    s->add_option("--model", cl_.model, "Forest model file")->required();
    s->add_option("--stage-one", cl_.stage_one, "Stage-one detection file (two-stage mode)");
    s->add_option("--images", cl_.images, "Annotation file listing images (baseline mode)");
    s->add_option("--out", cl_.out, "Output directory")->required();
    cl_.seg.add_to(s);
  }

  // Pairs each ground-truth record with its (score-filtered) detections.
  struct Evaluation {
    std::vector<std::string> ids;
    std::vector<std::vector<Detection>> dets;
    std::vector<const ImageRecord*> gts;
  };

  Evaluation pair_up(const Dataset& gt, const DetectionSet& dets, double score) {
    for (const auto& r : dets.records) {
      if (!gt.find(r.id)) throw ValidationFailure("detections for unknown image '" + r.id + "'");
    }
    Evaluation ev;
    for (const auto& r : gt.records) {
      ev.ids.push_back(r.id);
      ev.gts.push_back(&r);
      const auto* dr = dets.find(r.id);
      ev.dets.push_back(dr ? filter_by_score(dr->detections, score) : std::vector<Detection>{});
    }
    return ev;
  }

  void add_match(CLI::App& app) {
    auto* s = command(app, "match", "Match detections to ground truth", [this](const CLI::App& sub) {
      const auto gt = load_dataset(ma_.gt);
      const auto dets = load_detections(ma_.dets);
      const auto ev = pair_up(gt, dets, ma_.score);
      json out = json::array();
      for (std::size_t i = 0; i < ev.ids.size(); ++i) {
        out.push_back(match_json(ev.ids[i], match_detections(ev.dets[i], ev.gts[i]->objects, ma_.iou)));
      }
      write_file(fs::path(ma_.out) / "match.json", out.dump(1) + "\n");
      echo_config(sub, ma_.out);
      out_ << "matched " << ev.ids.size() << " images\n";
    });
    s->add_option("--gt", ma_.gt, "Ground-truth annotation file")->required();
    s->add_option("--dets", ma_.dets, "Detection file")->required();
    s->add_option("--iou", ma_.iou, "IoU threshold (strict)");
    s->add_option("--score", ma_.score, "Minimum detection score");
    s->add_option("--out", ma_.out, "Output directory")->required();
  }

  void add_eval(CLI::App& app) {
    auto* s = command(app, "eval", "Count tables, confusion matrix, accuracy and F1", [this](const CLI::App& sub) {
      const auto gt = load_dataset(ev_.gt);
      const auto dets = load_detections(ev_.dets);
      const auto ev = pair_up(gt, dets, ev_.score);
      ConfusionMatrix cm;
      AccuracyTally acc;
      ClassScores scores{};
      ClassCounts model_counts, gt_counts;
      std::size_t pairs = 0, spurious = 0, missed = 0;
      for (std::size_t i = 0; i < ev.ids.size(); ++i) {
        const auto& g = ev.gts[i]->objects;
        const auto& d = ev.dets[i];
        const auto m = match_detections(d, g, ev_.iou);
        pairs += m.pairs.size();
        spurious += m.unmatched_detections.size();
        missed += m.unmatched_ground_truth.size();
        cm += confusion(m, d, g);
        acc += accuracy_tally(m, d, g);
        scores += per_class_f1(m, d, g);
        const auto mc = count_objects(d);
        const auto gc = count_objects(g);
        for (std::size_t k = 0; k < kNumClasses; ++k) {
          model_counts.per_class[k] += mc.per_class[k];
          gt_counts.per_class[k] += gc.per_class[k];
        }
        gt_counts.difficult += gc.difficult;
      }
      const CountTable table{{"Model Count", "Ground Truth Count"}, {model_counts, gt_counts}, true, std::nullopt};
      const auto accuracy = acc.value();
      json metrics = {{"iou_threshold", ev_.iou},
                      {"score_threshold", ev_.score},
                      {"images", ev.ids.size()},
                      {"matched_pairs", pairs},
                      {"unmatched_detections", spurious},
                      {"unmatched_ground_truth", missed},
                      {"accuracy", accuracy ? json(*accuracy) : json(nullptr)},
                      {"accuracy_counted", acc.total},
                      {"accuracy_correct", acc.correct},
                      {"per_class", class_scores_json(scores)}};
      const fs::path out(ev_.out);
      write_file(out / "metrics.json", metrics.dump(2) + "\n");
      write_file(out / "counts.csv", render_count_table_csv(table));
      write_file(out / "counts.tsv", render_count_table_tsv(table));
      write_file(out / "confusion.csv", render_confusion_csv(cm));
      echo_config(sub, ev_.out);
      out_ << render_count_table_tsv(table);
      out_ << "accuracy (excluding rbc and difficult): "
           << (accuracy ? format_number(*accuracy) : std::string("undefined")) << "\n";
    });
    s->add_option("--gt", ev_.gt, "Ground-truth annotation file")->required();
    s->add_option("--dets", ev_.dets, "Detection file")->required();
    s->add_option("--iou", ev_.iou, "IoU threshold (strict)");
    s->add_option("--score", ev_.score, "Minimum detection score (inclusive)");
    s->add_option("--out", ev_.out, "Output directory")->required();
  }

  void add_agree(CLI::App& app) {
    auto* s = command(app, "agree", "Inter-annotator agreement", [this](const CLI::App& sub) {
      const auto a = load_dataset(ag_.a);
      const auto b = load_dataset(ag_.b);
      AgreementReport rep;
      try {
        rep = annotator_agreement(a, b, ag_.iou);
      } catch (const std::invalid_argument& e) {
        throw ValidationFailure(e.what());
      }
      CountTable table{{"Annotator 1 Count", "Annotator 2 Count"}, {rep.counts_a, rep.counts_b}, false,
                       std::array<std::optional<double>, kNumClasses>{}};
      for (auto c : kAllClasses) {
        const auto f1 = rep.scores[index_of(c)].f1();
        if (f1) (*table.f1_percent)[index_of(c)] = 100.0 * *f1;
      }
      json summary = {{"iou_threshold", ag_.iou},
                      {"matched", rep.matched},
                      {"label_disagreements", rep.label_disagreements},
                      {"per_class", class_scores_json(rep.scores)}};
      const fs::path out(ag_.out);
      write_file(out / "agreement.json", summary.dump(2) + "\n");
      write_file(out / "counts.csv", render_count_table_csv(table));
      write_file(out / "counts.tsv", render_count_table_tsv(table));
      echo_config(sub, ag_.out);
      out_ << render_count_table_tsv(table);
    });
    s->add_option("--a", ag_.a, "Reference annotator file")->required();
    s->add_option("--b", ag_.b, "Second annotator file")->required();
    s->add_option("--iou", ag_.iou, "IoU threshold (strict)");
    s->add_option("--out", ag_.out, "Output directory")->required();
  }

  void add_tsne(CLI::App& app) {
    auto* s = command(app, "tsne", "2-D t-SNE of a feature CSV", [this](const CLI::App& sub) {
      std::vector<FeatureRow> rows;
      try {
        rows = read_feature_csv(read_file(ts_.features));
      } catch (const FormatError& e) {
        throw ValidationFailure(ts_.features + ": " + e.what());
      }
      std::vector<std::vector<double>> X;
      std::vector<std::string> labels;
      for (const auto& r : rows) {
        X.emplace_back(r.features.begin(), r.features.end());
        labels.push_back(r.label);
      }
      if (ts_.standardize) standardize(X);
      tsne::Params p;
      p.perplexity = ts_.perplexity;
      p.iterations = ts_.iters;
      p.learning_rate = ts_.learning_rate;
      p.early_exaggeration = ts_.exaggeration;
      p.seed = ts_.seed;
      if (X.size() < 3 || p.perplexity >= static_cast<double>(X.size())) {
        throw ValidationFailure("t-SNE needs at least 3 points and perplexity < number of points");
      }
      const auto e = tsne::embed(X, p, labels);
      std::string trace = "iteration,kl\n";
      for (std::size_t i = 0; i < e.kl_trace.size(); ++i) {
        trace += std::to_string(i) + "," + format_number(e.kl_trace[i]) + "\n";
      }
      const fs::path out(ts_.out);
      write_file(out / "tsne.csv", write_coordinates_csv(e));
      write_file(out / "tsne.svg", render_tsne_svg(e));
      write_file(out / "kl_trace.csv", trace);
      echo_config(sub, ts_.out);
      out_ << "embedded " << e.n << " points, KL " << format_number(e.kl_trace.front()) << " -> "
           << format_number(e.kl_trace.back()) << "\n";
    });
    s->add_option("--features", ts_.features, "Feature CSV with a label column")->required();
    s->add_option("--out", ts_.out, "Output directory")->required();
    s->add_option("--perplexity", ts_.perplexity, "Target perplexity");
    s->add_option("--iters", ts_.iters, "Gradient descent iterations")->check(CLI::NonNegativeNumber);
    s->add_option("--learning-rate", ts_.learning_rate, "Learning rate");
    s->add_option("--exaggeration", ts_.exaggeration, "Early exaggeration factor");
    s->add_option("--seed", ts_.seed, "Random seed");
    s->add_flag("!--no-standardize", ts_.standardize, "Use raw feature values (default: z-score each column)");
  }

  static void standardize(std::vector<std::vector<double>>& X) {
    if (X.empty()) return;
    const std::size_t d = X.front().size();
    for (std::size_t k = 0; k < d; ++k) {
      double mean = 0, var = 0;
      for (const auto& r : X) mean += r[k];
      mean /= static_cast<double>(X.size());
      for (const auto& r : X) var += (r[k] - mean) * (r[k] - mean);
      const double sd = std::sqrt(var / static_cast<double>(X.size()));
      for (auto& r : X) r[k] = sd > 0 ? (r[k] - mean) / sd : 0.0;
    }
  }

  void add_report(CLI::App& app) {
    auto* s = command(app, "report", "Render tables and plots", [this](const CLI::App& sub) {
      ReportBundle bundle;
      try {
        if (!rp_.counts.empty()) bundle.counts = parse_count_table(read_file(rp_.counts));
        if (!rp_.confusion.empty()) bundle.confusion = parse_confusion_csv(read_file(rp_.confusion));
        if (!rp_.coords.empty()) bundle.embedding = read_coordinates_csv(read_file(rp_.coords));
      } catch (const FormatError& e) {
        throw ValidationFailure(e.what());
      }
      const auto files = render_report(bundle);
      for (const auto& [name, content] : files) write_file(fs::path(rp_.out) / name, content);
      echo_config(sub, rp_.out);
      if (bundle.counts) out_ << files.at("counts.tsv");
      out_ << "wrote " << files.size() << " report files\n";
    });
    s->add_option("--counts", rp_.counts, "Count table (CSV or TSV)");
    s->add_option("--confusion", rp_.confusion, "Confusion matrix CSV");
    s->add_option("--coords", rp_.coords, "t-SNE coordinates CSV");
    s->add_option("--out", rp_.out, "Output directory")->required();
  }

  void add_synth(CLI::App& app) {
    auto* s = command(app, "synth", "Write a synthetic smear corpus", [this](const CLI::App& sub) {
      synthetic::SceneParams p;
      p.width = sy_.width;
      p.height = sy_.height;
      p.cells = sy_.cells;
      const auto files = synthetic::write_corpus(sy_.out, sy_.images, p, sy_.seed);
      echo_config(sub, sy_.out);
      out_ << "wrote " << sy_.images << " images, " << files.annotations << ", " << files.stage_one << "\n";
    });
    s->add_option("--out", sy_.out, "Output directory")->required();
    s->add_option("--images", sy_.images, "Number of fields of view")->check(CLI::PositiveNumber);
    s->add_option("--cells", sy_.cells, "Cells per field")->check(CLI::NonNegativeNumber);
    s->add_option("--width", sy_.width, "Field width")->check(CLI::PositiveNumber);
    s->add_option("--height", sy_.height, "Field height")->check(CLI::PositiveNumber);
    s->add_option("--seed", sy_.seed, "Random seed");
  }

  std::ostream& out_;
  std::ostream& err_;
  std::function<void(const CLI::App&)> action_;

  struct { std::string annotations, detections, stage_one; } v_;
  struct { std::string annotations, out; } st_;
  struct { std::string annotations, out; double val_fraction = 0.2; std::uint64_t seed = 0; } sp_;
  struct {
    std::string annotations, out;
    int size = 448;
    double multiplier = 2.0;
    int max_crops = 100;
    std::uint64_t seed = 0;
    bool no_balance = false;
    bool no_difficult_rotation = false;
  } cr_;
  struct { std::string annotations, out; double iou = kDefaultIouThreshold; SegmentOptions seg; } sg_;
  struct {
    std::string annotations, out, source = "gt";
    double iou = kDefaultIouThreshold;
    SegmentOptions seg;
  } fe_;
  struct {
    std::string annotations, features, mode = "stage-two", out;
    std::uint64_t seed = 0;
    double iou = kDefaultIouThreshold;
    bool include_difficult = false;
    ForestOptions forest;
    SegmentOptions seg;
  } tr_;
  struct { std::string model, stage_one, images, out; SegmentOptions seg; } cl_;
  struct { std::string gt, dets, out; double iou = kDefaultIouThreshold; double score = 0.0; } ma_;
  struct { std::string gt, dets, out; double iou = kDefaultIouThreshold; double score = kDefaultScoreThreshold; } ev_;
  struct { std::string a, b, out; double iou = kDefaultIouThreshold; } ag_;
  struct {
    std::string features, out;
    double perplexity = 30.0;
    int iters = 1000;
    double learning_rate = 200.0;
    double exaggeration = 12.0;
    std::uint64_t seed = 0;
    bool standardize = true;
  } ts_;
  struct { std::string counts, confusion, coords, out; } rp_;
  struct {
    std::string out;
    int images = 6, cells = 40, width = 640, height = 512;
    std::uint64_t seed = 0;
  } sy_;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Runner runner(out, err);
  return runner.run(args);
}

}  // namespace smear::cli
