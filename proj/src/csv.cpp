#include "smear/csv.hpp"

#include <charconv>
#include <cmath>

namespace smear {

namespace {

constexpr std::array<std::string_view, 6> kFeaturePrefix = {"image_id", "object_index", "xmin",
                                                            "ymin",     "xmax",         "ymax"};

}  // namespace

std::string format_number(double v) {
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw FormatError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text, char delimiter) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, row_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      row_started = true;
    } else if (c == delimiter) {
      row.push_back(std::move(field));
      field.clear();
      row_started = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (row_started || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      field.clear();
      row.clear();
      row_started = false;
    } else {
      field += c;
      row_started = true;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field");
  if (row_started || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r\t") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string feature_csv_header() {
  std::string h;
  for (auto name : kFeaturePrefix) {
    h += name;
    h += ',';
  }
  for (auto name : feature_names()) {
    h += name;
    h += ',';
  }
  h += "label";
  return h;
}

std::string write_feature_csv(const std::vector<FeatureRow>& rows) {
  std::string out = feature_csv_header() + "\n";
  for (const auto& r : rows) {
    out += csv_field(r.image_id) + "," + std::to_string(r.object_index) + "," +
           format_number(r.box.xmin) + "," + format_number(r.box.ymin) + "," +
           format_number(r.box.xmax) + "," + format_number(r.box.ymax);
    for (double v : r.features) out += "," + format_number(v);
    out += "," + csv_field(r.label) + "\n";
  }
  return out;
}

std::vector<FeatureRow> read_feature_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw FormatError("feature CSV is empty");
  const auto& header = rows.front();
  const std::size_t fixed = kFeaturePrefix.size() + kFeatureDim;
  const bool has_label = header.size() == fixed + 1;
  if (header.size() != fixed && !has_label) throw FormatError("feature CSV header has the wrong width");
  for (std::size_t k = 0; k < fixed; ++k) {
    const auto expected = k < kFeaturePrefix.size() ? kFeaturePrefix[k]
                                                    : feature_names()[k - kFeaturePrefix.size()];
    if (header[k] != expected) {
      throw FormatError("feature CSV column " + std::to_string(k) + " should be '" +
                        std::string(expected) + "'");
    }
  }
  if (has_label && header.back() != "label") throw FormatError("last feature CSV column must be 'label'");

  std::vector<FeatureRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != header.size()) {
      throw FormatError("feature CSV row " + std::to_string(i) + " has " + std::to_string(r.size()) +
                        " fields, expected " + std::to_string(header.size()));
    }
    FeatureRow row;
    row.image_id = r[0];
    const auto idx = parse_double(r[1]);
    if (idx < 0 || idx != std::floor(idx)) throw FormatError("bad object_index on row " + std::to_string(i));
    row.object_index = static_cast<std::size_t>(idx);
    row.box = {parse_double(r[2]), parse_double(r[3]), parse_double(r[4]), parse_double(r[5])};
    for (std::size_t k = 0; k < kFeatureDim; ++k) {
      row.features[k] = parse_double(r[kFeaturePrefix.size() + k]);
      if (!std::isfinite(row.features[k])) throw FormatError("non-finite feature on row " + std::to_string(i));
    }
    if (has_label) row.label = r.back();
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace smear
