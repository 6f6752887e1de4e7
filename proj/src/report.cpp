#include "smear/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "smear/csv.hpp"

namespace smear {

namespace {

constexpr char kF1Header[] = "F1 score (%)";
constexpr char kDifficultRow[] = "difficult";

std::vector<CellClass> table_rows(const CountTable& t) {
  std::vector<CellClass> rows;
  for (auto c : kReportRowOrder) {
    if (c != CellClass::rbc || t.include_rbc) rows.push_back(c);
  }
  return rows;
}

std::string render_grid(const CountTable& t, char delim, std::string_view corner) {
  if (t.sources.size() != t.columns.size()) {
    throw std::invalid_argument("count table needs one header per column");
  }
  auto cell = [&](std::string_view s) { return delim == ',' ? csv_field(s) : std::string(s); };
  std::string out(corner);
  for (const auto& s : t.sources) out += delim + cell(s);
  if (t.f1_percent) out += delim + cell(kF1Header);
  out += '\n';
  for (auto c : table_rows(t)) {
    out += report_row_name(c);
    for (const auto& col : t.columns) out += delim + std::to_string(col[c]);
    if (t.f1_percent) {
      const auto& v = (*t.f1_percent)[index_of(c)];
      out += delim;
      out += v ? std::to_string(std::lround(*v)) : std::string("--");
    }
    out += '\n';
  }
  out += kDifficultRow;
  for (const auto& col : t.columns) out += delim + std::to_string(col.difficult);
  if (t.f1_percent) out += std::string(1, delim) + "--";
  out += '\n';
  return out;
}

std::size_t parse_count(const std::string& s) {
  const double v = parse_double(s);
  if (v < 0 || v != std::floor(v)) throw FormatError("count must be a non-negative integer: '" + s + "'");
  return static_cast<std::size_t>(v);
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  std::string s(buf);
  return s == "-0.00" ? "0.00" : s;
}

std::string color_for(const std::string& label, std::size_t fallback_index) {
  static const std::map<std::string, std::string, std::less<>> kColors = {
      {"rbc", "#1f77b4"},        {"trophozoite", "#ff7f0e"}, {"schizont", "#2ca02c"},
      {"ring", "#d62728"},       {"gametocyte", "#9467bd"},  {"leukocyte", "#8c564b"},
      {"difficult", "#7f7f7f"}};
  static const std::array<const char*, 5> kExtra = {"#bcbd22", "#17becf", "#e377c2", "#393b79",
                                                    "#637939"};
  const auto it = kColors.find(label);
  if (it != kColors.end()) return it->second;
  return kExtra[fallback_index % kExtra.size()];
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Legend order: classes in table order, then difficult, then anything else sorted.
std::vector<std::string> legend_order(const std::vector<std::string>& labels) {
  std::set<std::string> present(labels.begin(), labels.end());
  std::vector<std::string> out;
  for (auto c : kReportRowOrder) {
    const std::string name(to_string(c));
    if (present.erase(name)) out.push_back(name);
  }
  if (present.erase(kDifficultRow)) out.emplace_back(kDifficultRow);
  out.insert(out.end(), present.begin(), present.end());
  return out;
}

}  // namespace

std::string report_row_name(CellClass c) {
  return c == CellClass::rbc ? std::string("RBC") : std::string(to_string(c));
}

std::string render_count_table_tsv(const CountTable& t) { return render_grid(t, '\t', ""); }

std::string render_count_table_csv(const CountTable& t) { return render_grid(t, ',', "class"); }

CountTable parse_count_table(std::string_view text) {
  const auto first_line = text.substr(0, text.find('\n'));
  const char delim = first_line.find('\t') != std::string_view::npos ? '\t' : ',';
  const auto rows = parse_csv(text, delim);
  if (rows.size() < 2) throw FormatError("count table needs a header and at least one row");

  CountTable t;
  t.include_rbc = false;
  auto header = rows.front();
  if (!header.empty() && header.back() == kF1Header) {
    t.f1_percent.emplace();
    header.pop_back();
  }
  if (header.size() < 2) throw FormatError("count table has no source columns");
  t.sources.assign(header.begin() + 1, header.end());
  t.columns.assign(t.sources.size(), ClassCounts{});

  std::set<std::string> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != rows.front().size()) {
      throw FormatError("count table row " + std::to_string(i) + " has the wrong width");
    }
    if (!seen.insert(r[0]).second) throw FormatError("duplicate count table row '" + r[0] + "'");
    const bool difficult = r[0] == kDifficultRow;
    std::optional<CellClass> c;
    if (!difficult) {
      c = r[0] == "RBC" ? std::optional(CellClass::rbc) : parse_cell_class(r[0]);
      if (!c) throw FormatError("unknown count table row '" + r[0] + "'");
      if (*c == CellClass::rbc) t.include_rbc = true;
    }
    for (std::size_t k = 0; k < t.sources.size(); ++k) {
      const auto v = parse_count(r[k + 1]);
      if (difficult) {
        t.columns[k].difficult = v;
      } else {
        t.columns[k][*c] = v;
      }
    }
    if (t.f1_percent && !difficult && r.back() != "--") {
      (*t.f1_percent)[index_of(*c)] = parse_double(r.back());
    }
  }
  return t;
}

std::string render_confusion_csv(const ConfusionMatrix& m) {
  std::string out = "ground_truth\\predicted";
  for (auto c : kAllClasses) out += "," + std::string(to_string(c));
  out += ",missed\n";
  for (std::size_t r = 0; r <= kNumClasses; ++r) {
    out += r < kNumClasses ? std::string(to_string(kAllClasses[r])) : std::string("spurious");
    for (std::size_t c = 0; c <= kNumClasses; ++c) out += "," + std::to_string(m.at(r, c));
    out += '\n';
  }
  return out;
}

ConfusionMatrix parse_confusion_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.size() != kNumClasses + 2) throw FormatError("confusion CSV must have 8 rows");
  ConfusionMatrix m;
  for (std::size_t r = 0; r <= kNumClasses; ++r) {
    const auto& row = rows[r + 1];
    if (row.size() != kNumClasses + 2) throw FormatError("confusion CSV row has the wrong width");
    for (std::size_t c = 0; c <= kNumClasses; ++c) m.at(r, c) = parse_count(row[c + 1]);
  }
  return m;
}

std::string write_coordinates_csv(const tsne::Embedding& e) {
  std::string out = "index,x,y,label\n";
  for (std::size_t i = 0; i < e.n; ++i) {
    out += std::to_string(i) + "," + format_number(e.y[2 * i]) + "," + format_number(e.y[2 * i + 1]) +
           "," + csv_field(e.labels.empty() ? std::string() : e.labels[i]) + "\n";
  }
  return out;
}

tsne::Embedding read_coordinates_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows.front() != std::vector<std::string>{"index", "x", "y", "label"}) {
    throw FormatError("coordinates CSV must start with 'index,x,y,label'");
  }
  tsne::Embedding e;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 4) throw FormatError("coordinates CSV row has the wrong width");
    e.y.push_back(parse_double(rows[i][1]));
    e.y.push_back(parse_double(rows[i][2]));
    e.labels.push_back(rows[i][3]);
  }
  e.n = rows.size() - 1;
  return e;
}

std::string render_tsne_svg(const tsne::Embedding& e) {
  constexpr double kPlot = 560, kMargin = 20, kLegendWidth = 160, kRadius = 2.5;
  const double width = kPlot + 2 * kMargin + kLegendWidth;
  const double height = kPlot + 2 * kMargin;

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (e.n > 0) {
    xmin = xmax = e.y[0];
    ymin = ymax = e.y[1];
    for (std::size_t i = 0; i < e.n; ++i) {
      xmin = std::min(xmin, e.y[2 * i]);
      xmax = std::max(xmax, e.y[2 * i]);
      ymin = std::min(ymin, e.y[2 * i + 1]);
      ymax = std::max(ymax, e.y[2 * i + 1]);
    }
  }
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-12});
  auto px = [&](double v) { return kMargin + (v - xmin) / span * kPlot; };
  auto py = [&](double v) { return kMargin + kPlot - (v - ymin) / span * kPlot; };

  std::vector<std::string> labels(e.n);
  for (std::size_t i = 0; i < e.n; ++i) {
    labels[i] = e.labels.empty() || e.labels[i].empty() ? "unlabeled" : e.labels[i];
  }
  const auto legend = legend_order(labels);
  std::map<std::string, std::string> colors;
  for (std::size_t k = 0; k < legend.size(); ++k) colors[legend[k]] = color_for(legend[k], k);

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed2(width) +
                    "\" height=\"" + fixed2(height) + "\" viewBox=\"0 0 " + fixed2(width) + " " +
                    fixed2(height) + "\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + fixed2(width) + "\" height=\"" + fixed2(height) +
         "\" fill=\"white\"/>\n";
  out += "<g id=\"points\">\n";
  for (std::size_t i = 0; i < e.n; ++i) {
    out += "<circle cx=\"" + fixed2(px(e.y[2 * i])) + "\" cy=\"" + fixed2(py(e.y[2 * i + 1])) +
           "\" r=\"" + fixed2(kRadius) + "\" fill=\"" + colors[labels[i]] + "\"/>\n";
  }
  out += "</g>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t k = 0; k < legend.size(); ++k) {
    const double y = kMargin + 10 + 18.0 * static_cast<double>(k);
    const double x = kPlot + 2 * kMargin;
    out += "<circle cx=\"" + fixed2(x + 6) + "\" cy=\"" + fixed2(y) + "\" r=\"5.00\" fill=\"" +
           colors[legend[k]] + "\"/>\n";
    out += "<text x=\"" + fixed2(x + 16) + "\" y=\"" + fixed2(y + 4) + "\">" + xml_escape(legend[k]) +
           "</text>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

std::map<std::string, std::string> render_report(const ReportBundle& bundle) {
  if (!bundle.counts && !bundle.confusion && !bundle.embedding) {
    throw EmptyReportError("nothing to report: no counts, confusion matrix or embedding given");
  }
  std::map<std::string, std::string> files;
  if (bundle.counts) {
    files["counts.csv"] = render_count_table_csv(*bundle.counts);
    files["counts.tsv"] = render_count_table_tsv(*bundle.counts);
  }
  if (bundle.confusion) files["confusion.csv"] = render_confusion_csv(*bundle.confusion);
  if (bundle.embedding) {
    files["tsne.csv"] = write_coordinates_csv(*bundle.embedding);
    files["tsne.svg"] = render_tsne_svg(*bundle.embedding);
  }
  return files;
}

}  // namespace smear
