#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "smear/dataset.hpp"
#include "smear/segfeat.hpp"

namespace smear {

/// Shortest decimal form that parses back to the same double.
std::string format_number(double v);

/// Splits CSV text into rows of fields. Handles quoted fields and CRLF.
std::vector<std::vector<std::string>> parse_csv(std::string_view text, char delimiter = ',');

/// Quotes a field only when it contains the delimiter, a quote or a newline.
std::string csv_field(std::string_view s);

double parse_double(std::string_view s);

/// One row of the feature CSV:
///   image_id,object_index,xmin,ymin,xmax,ymax,<35 feature columns>,label
/// `label` is a class name, "difficult", or empty when unknown.
struct FeatureRow {
  std::string image_id;
  std::size_t object_index = 0;
  BoundingBox box;
  FeatureVector features{};
  std::string label;

  friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

std::string feature_csv_header();
std::string write_feature_csv(const std::vector<FeatureRow>& rows);
/// The label column may be absent; throws FormatError on a header mismatch.
std::vector<FeatureRow> read_feature_csv(std::string_view text);

}  // namespace smear
