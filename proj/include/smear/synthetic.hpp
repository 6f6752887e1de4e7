#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "smear/dataset.hpp"
#include "smear/pipeline.hpp"

namespace smear::synthetic {

// Programmatic blood-smear-like scenes with known ground truth: bright
// background, cells drawn as disks whose interior pattern depends on class.

/// Draws one cell of class `c` centered at (cx, cy) with the given radius.
void draw_cell(cv::Mat& image, double cx, double cy, double radius, CellClass c, std::uint64_t seed);

/// Typical radius range of each archetype.
std::pair<double, double> radius_range(CellClass c);

cv::Mat blank_background(int width, int height);

struct SceneParams {
  int width = 640;
  int height = 512;
  int cells = 40;
  // Relative frequency of each class, indexed by CellClass.
  std::array<double, kNumClasses> class_mix = {0.70, 0.06, 0.06, 0.06, 0.06, 0.06};
  double difficult_fraction = 0.05;
  double noise_stddev = 3.0;
  double min_gap = 3.0;  // minimum pixel gap between cell outlines
};

struct Scene {
  cv::Mat image;
  ImageRecord record;
};

/// Non-overlapping cells placed at random; the record's boxes are the disks'
/// bounding squares.
Scene make_scene(const std::string& id, const SceneParams& params, std::uint64_t seed);

/// Simulated detector output: ground-truth boxes jittered by a pixel or two,
/// coarse labels, random scores; a few misses and low-scored spurious boxes.
StageOneRecord simulate_stage_one(const ImageRecord& record, std::uint64_t seed);

struct CorpusFiles {
  std::string annotations;  // file names within the corpus directory
  std::string stage_one;
};

/// Writes `images/<id>.png`, `gt.json` and `stage1.json` into `dir`.
CorpusFiles write_corpus(const std::string& dir, int images, const SceneParams& params,
                         std::uint64_t seed);

}  // namespace smear::synthetic
