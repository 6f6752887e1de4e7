#pragma once

// Independent reference computations used to check the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "smear/dataset.hpp"
#include "smear/rng.hpp"

namespace oracle {

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string fixture(const std::string& name) { return slurp(std::filesystem::path(FIXTURE_DIR) / name); }

// IoU by counting cells of a fine grid whose centers fall inside each box.
inline double raster_iou(const smear::BoundingBox& a, const smear::BoundingBox& b, double cell) {
  const double x0 = std::min(a.xmin, b.xmin), x1 = std::max(a.xmax, b.xmax);
  const double y0 = std::min(a.ymin, b.ymin), y1 = std::max(a.ymax, b.ymax);
  const long nx = static_cast<long>(std::ceil((x1 - x0) / cell));
  const long ny = static_cast<long>(std::ceil((y1 - y0) / cell));
  long inter = 0, uni = 0;
  for (long j = 0; j < ny; ++j) {
    const double y = y0 + (static_cast<double>(j) + 0.5) * cell;
    const bool ya = y >= a.ymin && y < a.ymax, yb = y >= b.ymin && y < b.ymax;
    if (!ya && !yb) continue;
    for (long i = 0; i < nx; ++i) {
      const double x = x0 + (static_cast<double>(i) + 0.5) * cell;
      const bool ia = ya && x >= a.xmin && x < a.xmax;
      const bool ib = yb && x >= b.xmin && x < b.xmax;
      inter += ia && ib;
      uni += ia || ib;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Maps the four corners by (x, y) -> (S - y, x) `turns` times and re-normalizes.
inline smear::BoundingBox corner_rotate(const smear::BoundingBox& b, double S, int turns) {
  std::array<std::pair<double, double>, 4> pts = {
      std::pair{b.xmin, b.ymin}, {b.xmax, b.ymin}, {b.xmin, b.ymax}, {b.xmax, b.ymax}};
  for (int t = 0; t < turns; ++t) {
    for (auto& [x, y] : pts) {
      const double nx = S - y, ny = x;
      x = nx;
      y = ny;
    }
  }
  smear::BoundingBox out{pts[0].first, pts[0].second, pts[0].first, pts[0].second};
  for (const auto& [x, y] : pts) {
    out.xmin = std::min(out.xmin, x);
    out.xmax = std::max(out.xmax, x);
    out.ymin = std::min(out.ymin, y);
    out.ymax = std::max(out.ymax, y);
  }
  return out;
}

inline smear::BoundingBox random_box(smear::Rng& rng, double extent, double min_side, double max_side) {
  const double w = rng.uniform(min_side, max_side), h = rng.uniform(min_side, max_side);
  const double x = rng.uniform(0, extent - w), y = rng.uniform(0, extent - h);
  return {x, y, x + w, y + h};
}

// Mean silhouette coefficient of 2-D points with integer cluster labels.
inline double silhouette(const std::vector<double>& y, const std::vector<int>& label) {
  const std::size_t n = label.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double same = 0, other = 0;
    std::size_t ns = 0, no = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = std::hypot(y[2 * i] - y[2 * j], y[2 * i + 1] - y[2 * j + 1]);
      if (label[j] == label[i]) {
        same += d;
        ++ns;
      } else {
        other += d;
        ++no;
      }
    }
    const double a = ns ? same / static_cast<double>(ns) : 0.0;
    const double b = no ? other / static_cast<double>(no) : 0.0;
    total += (ns == 0 || std::max(a, b) == 0) ? 0.0 : (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

// Shannon entropy in bits of the Gaussian conditional over sq_distances.
inline double conditional_entropy_bits(const std::vector<double>& d2, double beta) {
  const double dmin = *std::min_element(d2.begin(), d2.end());
  std::vector<double> p(d2.size());
  double z = 0;
  for (std::size_t k = 0; k < d2.size(); ++k) z += p[k] = std::exp(-beta * (d2[k] - dmin));
  double h = 0;
  for (double v : p) {
    const double q = v / z;
    if (q > 0) h -= q * std::log2(q);
  }
  return h;
}

inline double gini_oracle(const std::vector<double>& w) {
  double total = 0;
  for (double v : w) total += v;
  if (total <= 0) return 0;
  double sq = 0;
  for (double v : w) sq += (v / total) * (v / total);
  return 1.0 - sq;
}

struct BruteSplit {
  int feature = -1;
  double threshold = 0;
  double impurity = 0;
};

// Every midpoint of every candidate feature, children evaluated from scratch.
inline BruteSplit brute_force_split(const std::vector<std::vector<double>>& X, const std::vector<std::size_t>& rows,
                        const std::vector<int>& labels, const std::vector<double>& weights,
                        const std::vector<int>& counts, std::size_t n_slots, const std::vector<int>& features,
                        int min_leaf) {
  BruteSplit best;
  for (int f : features) {
    std::vector<double> values;
    for (auto r : rows) values.push_back(X[r][f]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      const double t = values[i] + 0.5 * (values[i + 1] - values[i]);
      std::vector<double> l(n_slots, 0), r(n_slots, 0);
      int nl = 0, nr = 0;
      for (auto row : rows) {
        if (X[row][f] <= t) {
          l[labels[row]] += weights[row];
          nl += counts[row];
        } else {
          r[labels[row]] += weights[row];
          nr += counts[row];
        }
      }
      if (nl < min_leaf || nr < min_leaf) continue;
      const double wl = std::accumulate(l.begin(), l.end(), 0.0), wr = std::accumulate(r.begin(), r.end(), 0.0);
      const double imp = wl * gini_oracle(l) + wr * gini_oracle(r);
      if (best.feature < 0 || imp < best.impurity - 1e-12) best = {f, t, imp};
    }
  }
  return best;
}

}  // namespace oracle
