#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "smear/dataset.hpp"
#include "smear/metrics.hpp"
#include "smear/tsne.hpp"

namespace smear {

/// Side-by-side per-class counts. Rows follow the published table order:
/// RBC, trophozoite, schizont, ring, gametocyte, leukocyte, difficult.
struct CountTable {
  std::vector<std::string> sources;  // column headers, e.g. "Model Count"
  std::vector<ClassCounts> columns;
  bool include_rbc = true;
  // Optional trailing "F1 score (%)" column, one entry per class; rendered
  // as a rounded integer percentage, "--" when empty and for the difficult row.
  std::optional<std::array<std::optional<double>, kNumClasses>> f1_percent;

  friend bool operator==(const CountTable&, const CountTable&) = default;
};

inline constexpr std::array<CellClass, kNumClasses> kReportRowOrder = {
    CellClass::rbc,  CellClass::trophozoite, CellClass::schizont,
    CellClass::ring, CellClass::gametocyte,  CellClass::leukocyte};

/// "RBC" for rbc, the class name otherwise.
std::string report_row_name(CellClass c);

/// Tab-separated layout: header starts with an empty cell, one row per class.
std::string render_count_table_tsv(const CountTable& t);
/// Same grid, comma-separated, with "class" as the first header cell.
std::string render_count_table_csv(const CountTable& t);
/// Reads either rendering back (delimiter detected from the header).
CountTable parse_count_table(std::string_view text);

/// Column headers: rbc..schizont then "missed"; row headers likewise with
/// a final "spurious" row.
std::string render_confusion_csv(const ConfusionMatrix& m);
ConfusionMatrix parse_confusion_csv(std::string_view text);

/// "index,x,y,label" rows.
std::string write_coordinates_csv(const tsne::Embedding& e);
tsne::Embedding read_coordinates_csv(std::string_view text);

/// Scatter plot, one color per label, with a legend.
std::string render_tsne_svg(const tsne::Embedding& e);

class EmptyReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReportBundle {
  std::optional<CountTable> counts;
  std::optional<ConfusionMatrix> confusion;
  std::optional<tsne::Embedding> embedding;
};

/// File name -> content. Output depends only on the bundle (no timestamps).
/// Throws EmptyReportError when the bundle holds nothing.
std::map<std::string, std::string> render_report(const ReportBundle& bundle);

}  // namespace smear
