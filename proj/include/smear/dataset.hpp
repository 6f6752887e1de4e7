#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace smear {

// Declaration order is significant: it is the tie-break order for
// classifier votes and the column order of every per-class array.
enum class CellClass : std::uint8_t {
  rbc,
  leukocyte,
  gametocyte,
  ring,
  trophozoite,
  schizont,
};

inline constexpr std::size_t kNumClasses = 6;

inline constexpr std::array<CellClass, kNumClasses> kAllClasses = {
    CellClass::rbc,  CellClass::leukocyte,   CellClass::gametocyte,
    CellClass::ring, CellClass::trophozoite, CellClass::schizont};

constexpr std::size_t index_of(CellClass c) { return static_cast<std::size_t>(c); }

std::string_view to_string(CellClass c);
std::optional<CellClass> parse_cell_class(std::string_view name);

/// Raised for any malformed annotation, detection or model input.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned box in continuous pixel coordinates.
struct BoundingBox {
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (xmin + xmax); }
  double center_y() const { return 0.5 * (ymin + ymax); }
  bool valid() const { return xmin < xmax && ymin < ymax; }
  bool inside(double w, double h) const {
    return xmin >= 0 && ymin >= 0 && xmax <= w && ymax <= h;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct GroundTruthObject {
  BoundingBox box;
  CellClass label = CellClass::rbc;
  bool difficult = false;

  friend bool operator==(const GroundTruthObject&, const GroundTruthObject&) = default;
};

struct Detection {
  BoundingBox box;
  CellClass label = CellClass::rbc;
  double score = 1.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct ImageRecord {
  std::string id;
  int width = 0;
  int height = 0;
  std::string path;
  std::vector<GroundTruthObject> objects;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

enum class Split : std::uint8_t { unsplit, train, val, test };

std::string_view to_string(Split s);
std::optional<Split> parse_split(std::string_view name);

struct Dataset {
  std::vector<ImageRecord> records;
  Split split = Split::unsplit;

  const ImageRecord* find(std::string_view id) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Detections for one image. The file shape mirrors ImageRecord.
struct DetectionRecord {
  std::string id;
  int width = 0;
  int height = 0;
  std::string path;
  std::vector<Detection> detections;

  friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

struct DetectionSet {
  std::vector<DetectionRecord> records;

  const DetectionRecord* find(std::string_view id) const;

  friend bool operator==(const DetectionSet&, const DetectionSet&) = default;
};

// Annotation file: a JSON array of image objects, or one image object per
// line. A top-level {"split": ..., "images": [...]} wrapper carries the split
// tag of a split dataset.
Dataset parse_dataset(std::string_view text);
std::string serialize_dataset(const Dataset& d);

DetectionSet parse_detections(std::string_view text);
std::string serialize_detections(const DetectionSet& d);

/// Throws FormatError if any type invariant is violated.
void validate(const Dataset& d);
void validate(const DetectionSet& d);

/// Per-class counts with difficult objects tallied separately, so a
/// difficult ring adds to `difficult` and not to `per_class[ring]`.
struct ClassCounts {
  std::array<std::size_t, kNumClasses> per_class{};
  std::size_t difficult = 0;

  std::size_t operator[](CellClass c) const { return per_class[index_of(c)]; }
  std::size_t& operator[](CellClass c) { return per_class[index_of(c)]; }
  std::size_t total() const;

  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct ClassDistribution {
  ClassCounts counts;
  // Fractions of the total object count; all zero when the dataset is empty.
  std::array<double, kNumClasses> fraction{};
  double difficult_fraction = 0.0;

  bool empty() const { return counts.total() == 0; }
  double operator[](CellClass c) const { return fraction[index_of(c)]; }
};

ClassDistribution class_distribution(const Dataset& d);

struct DatasetSplit {
  Dataset train;
  Dataset val;
};

/// Partitions by image. |val| = round(val_fraction * |records|); records keep
/// their input order within each side.
DatasetSplit split_dataset(const Dataset& d, double val_fraction, std::uint64_t seed);

}  // namespace smear
