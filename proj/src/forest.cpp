#include "smear/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "smear/rng.hpp"

namespace smear {

namespace {

using nlohmann::json;

constexpr char kFormatTag[] = "smear-forest";

struct NodeSamples {
  std::vector<std::size_t> rows;  // unique training rows
  int node = 0;
  int depth = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& X, const std::vector<int>& slots,
              const std::vector<double>& slot_weight, std::size_t n_slots, const ForestParams& params,
              std::uint64_t seed)
      : X_(X), slots_(slots), slot_weight_(slot_weight), n_slots_(n_slots), params_(params),
        rng_(seed) {}

  DecisionTree build() {
    const std::size_t n = X_.size();
    counts_.assign(n, 0);
    if (params_.bootstrap) {
      for (std::size_t i = 0; i < n; ++i) ++counts_[static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(n) - 1))];
    } else {
      std::fill(counts_.begin(), counts_.end(), 1);
    }
    weights_.resize(n);
    for (std::size_t i = 0; i < n; ++i) weights_[i] = slot_weight_[slots_[i]] * counts_[i];

    NodeSamples root;
    for (std::size_t i = 0; i < n; ++i) {
      if (counts_[i] > 0) root.rows.push_back(i);
    }
    tree_.nodes.emplace_back();
    std::vector<NodeSamples> stack;
    stack.push_back(std::move(root));
    while (!stack.empty()) {
      NodeSamples ns = std::move(stack.back());
      stack.pop_back();
      grow(std::move(ns), stack);
    }
    return std::move(tree_);
  }

 private:
  void grow(NodeSamples ns, std::vector<NodeSamples>& stack) {
    std::vector<double> dist(n_slots_, 0.0);
    int total_count = 0;
    for (auto r : ns.rows) {
      dist[slots_[r]] += weights_[r];
      total_count += counts_[r];
    }
    const auto nonzero = std::count_if(dist.begin(), dist.end(), [](double w) { return w > 0; });
    const bool depth_done = params_.max_depth && ns.depth >= *params_.max_depth;
    if (nonzero <= 1 || depth_done || total_count < 2 * params_.min_samples_leaf) {
      make_leaf(ns.node, std::move(dist));
      return;
    }

    const auto features = candidate_features(ns.rows);
    const auto split = features.empty()
                           ? SplitCandidate{}
                           : best_split(X_, ns.rows, slots_, weights_, counts_, n_slots_, features,
                                        params_.min_samples_leaf);
    if (!split.found()) {
      make_leaf(ns.node, std::move(dist));
      return;
    }

    NodeSamples left, right;
    for (auto r : ns.rows) {
      (X_[r][split.feature] <= split.threshold ? left : right).rows.push_back(r);
    }
    left.depth = right.depth = ns.depth + 1;
    left.node = static_cast<int>(tree_.nodes.size());
    right.node = left.node + 1;
    tree_.nodes.emplace_back();
    tree_.nodes.emplace_back();
    auto& node = tree_.nodes[ns.node];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left.node;
    node.right = right.node;
    stack.push_back(std::move(right));
    stack.push_back(std::move(left));
  }

  // A random feature order; the first `m` features that are not constant on
  // the node's samples become candidates.
  std::vector<int> candidate_features(const std::vector<std::size_t>& rows) {
    const int dim = static_cast<int>(X_.front().size());
    const int m = params_.features_per_split.value_or(
        static_cast<int>(std::ceil(std::sqrt(static_cast<double>(dim)))));
    std::vector<int> order(dim);
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(order.begin(), order.end());
    std::vector<int> out;
    for (int f : order) {
      if (static_cast<int>(out.size()) >= m) break;
      const double first = X_[rows.front()][f];
      const bool constant = std::all_of(rows.begin(), rows.end(),
                                        [&](std::size_t r) { return X_[r][f] == first; });
      if (!constant) out.push_back(f);
    }
    return out;
  }

  void make_leaf(int node, std::vector<double> dist) {
    auto& n = tree_.nodes[node];
    n.feature = -1;
    n.distribution = std::move(dist);
  }

  const std::vector<std::vector<double>>& X_;
  const std::vector<int>& slots_;
  const std::vector<double>& slot_weight_;
  std::size_t n_slots_;
  const ForestParams& params_;
  Rng rng_;
  std::vector<int> counts_;
  std::vector<double> weights_;
  DecisionTree tree_;
};

std::string_view mode_name(ClassWeightMode m) {
  switch (m) {
    case ClassWeightMode::balanced: return "balanced";
    case ClassWeightMode::explicit_map: return "explicit";
    case ClassWeightMode::none: break;
  }
  return "none";
}

ClassWeightMode parse_mode(const std::string& s) {
  if (s == "none") return ClassWeightMode::none;
  if (s == "balanced") return ClassWeightMode::balanced;
  if (s == "explicit") return ClassWeightMode::explicit_map;
  throw FormatError("unknown class weight mode '" + s + "'");
}

CellClass class_from_json(const json& j) {
  const auto c = parse_cell_class(j.get<std::string>());
  if (!c) throw FormatError("unknown class in model file");
  return *c;
}

}  // namespace

void ForestParams::validate() const {
  if (n_trees < 1) throw std::invalid_argument("n_trees must be >= 1");
  if (min_samples_leaf < 1) throw std::invalid_argument("min_samples_leaf must be >= 1");
  if (max_depth && *max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
  if (features_per_split && *features_per_split < 1) {
    throw std::invalid_argument("features_per_split must be >= 1");
  }
  for (const auto& [c, w] : explicit_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("class weights must be positive");
  }
}

const DecisionTree::Node& DecisionTree::leaf_for(std::span<const double> x) const {
  const Node* n = &nodes.front();
  while (n->feature >= 0) n = &nodes[x[n->feature] <= n->threshold ? n->left : n->right];
  return *n;
}

double Prediction::probability_of(CellClass c, std::span<const CellClass> classes) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == c) return probabilities[i];
  }
  return 0.0;
}

ForestModel::ForestModel(std::vector<CellClass> classes, std::size_t dim, ForestParams params,
                         std::vector<DecisionTree> trees)
    : classes_(std::move(classes)), dim_(dim), params_(std::move(params)), trees_(std::move(trees)) {}

namespace {

Prediction argmax_prediction(std::vector<double> probs, const std::vector<CellClass>& classes) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < probs.size(); ++k) {
    if (probs[k] > probs[best]) best = k;
  }
  return {classes[best], std::move(probs)};
}

std::vector<double> normalized(const std::vector<double>& dist) {
  const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
  std::vector<double> out(dist.size());
  for (std::size_t k = 0; k < dist.size(); ++k) out[k] = dist[k] / total;
  return out;
}

}  // namespace

Prediction ForestModel::predict(std::span<const double> x) const {
  if (!trained()) throw std::logic_error("forest model is not trained");
  if (x.size() != dim_) throw std::invalid_argument("feature dimension mismatch");
  std::vector<double> acc(classes_.size(), 0.0);
  for (const auto& t : trees_) {
    const auto p = normalized(t.leaf_for(x).distribution);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += p[k];
  }
  for (auto& v : acc) v /= static_cast<double>(trees_.size());
  const double total = std::accumulate(acc.begin(), acc.end(), 0.0);
  for (auto& v : acc) v /= total;
  return argmax_prediction(std::move(acc), classes_);
}

Prediction ForestModel::predict_tree(std::size_t tree, std::span<const double> x) const {
  if (x.size() != dim_) throw std::invalid_argument("feature dimension mismatch");
  return argmax_prediction(normalized(trees_.at(tree).leaf_for(x).distribution), classes_);
}

std::vector<double> class_weights(const std::vector<CellClass>& y, const ForestParams& params) {
  std::vector<double> count(kNumClasses, 0.0);
  for (auto c : y) count[index_of(c)] += 1;
  const double present = static_cast<double>(std::count_if(count.begin(), count.end(), [](double v) { return v > 0; }));
  std::vector<double> w(kNumClasses, 0.0);
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    if (count[k] == 0) continue;
    switch (params.class_weights) {
      case ClassWeightMode::none: w[k] = 1.0; break;
      case ClassWeightMode::balanced:
        w[k] = static_cast<double>(y.size()) / (present * count[k]);
        break;
      case ClassWeightMode::explicit_map: {
        const auto it = params.explicit_weights.find(kAllClasses[k]);
        w[k] = it == params.explicit_weights.end() ? 1.0 : it->second;
        break;
      }
    }
  }
  return w;
}

double gini(std::span<const double> class_weight) {
  const double total = std::accumulate(class_weight.begin(), class_weight.end(), 0.0);
  if (total <= 0) return 0.0;
  double sq = 0;
  for (double w : class_weight) sq += (w / total) * (w / total);
  return 1.0 - sq;
}

SplitCandidate best_split(const std::vector<std::vector<double>>& X, std::span<const std::size_t> rows,
                          std::span<const int> labels, std::span<const double> weights,
                          std::span<const int> counts, std::size_t n_slots,
                          std::span<const int> features, int min_samples_leaf) {
  SplitCandidate best;
  std::vector<double> total(n_slots, 0.0);
  int total_count = 0;
  for (auto r : rows) {
    total[labels[r]] += weights[r];
    total_count += counts[r];
  }
  std::vector<std::size_t> sorted(rows.begin(), rows.end());
  std::vector<double> left(n_slots), right(n_slots);
  for (int f : features) {
    std::stable_sort(sorted.begin(), sorted.end(),
                     [&](std::size_t a, std::size_t b) { return X[a][f] < X[b][f]; });
    std::fill(left.begin(), left.end(), 0.0);
    int left_count = 0;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
      const auto r = sorted[i];
      left[labels[r]] += weights[r];
      left_count += counts[r];
      const double lo = X[r][f];
      const double hi = X[sorted[i + 1]][f];
      if (!(lo < hi)) continue;
      if (left_count < min_samples_leaf || total_count - left_count < min_samples_leaf) continue;
      double threshold = lo + 0.5 * (hi - lo);
      if (threshold >= hi) threshold = lo;
      double wl = 0, wr = 0;
      for (std::size_t k = 0; k < n_slots; ++k) {
        right[k] = total[k] - left[k];
        wl += left[k];
        wr += right[k];
      }
      const double impurity = wl * gini(left) + wr * gini(right);
      if (!best.found() || impurity < best.impurity) best = {f, threshold, impurity};
    }
  }
  return best;
}

ForestModel train_forest(const std::vector<std::vector<double>>& X, const std::vector<CellClass>& y,
                         const ForestParams& params) {
  params.validate();
  if (X.empty()) throw std::invalid_argument("empty training set");
  if (X.size() != y.size()) throw std::invalid_argument("feature/label count mismatch");
  const std::size_t dim = X.front().size();
  if (dim == 0) throw std::invalid_argument("zero-dimensional features");
  for (const auto& row : X) {
    if (row.size() != dim) throw std::invalid_argument("feature dimension mismatch");
  }

  std::vector<CellClass> classes;
  for (auto c : kAllClasses) {
    if (std::find(y.begin(), y.end(), c) != y.end()) classes.push_back(c);
  }
  std::vector<int> slot_of(kNumClasses, -1);
  for (std::size_t k = 0; k < classes.size(); ++k) slot_of[index_of(classes[k])] = static_cast<int>(k);
  std::vector<int> slots(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) slots[i] = slot_of[index_of(y[i])];

  const auto per_class = class_weights(y, params);
  std::vector<double> slot_weight(classes.size());
  for (std::size_t k = 0; k < classes.size(); ++k) slot_weight[k] = per_class[index_of(classes[k])];

  std::vector<DecisionTree> trees;
  trees.reserve(static_cast<std::size_t>(params.n_trees));
  for (int t = 0; t < params.n_trees; ++t) {
    TreeBuilder builder(X, slots, slot_weight, classes.size(), params,
                        mix_seed(params.seed, static_cast<std::uint64_t>(t)));
    trees.push_back(builder.build());
  }
  return ForestModel(std::move(classes), dim, params, std::move(trees));
}

std::string save_model(const ForestModel& m) {
  json j;
  j["format"] = kFormatTag;
  j["version"] = kModelFormatVersion;
  j["dim"] = m.dim();
  json classes = json::array();
  for (auto c : m.classes()) classes.push_back(std::string(to_string(c)));
  j["classes"] = classes;

  const auto& p = m.params();
  json params;
  params["n_trees"] = p.n_trees;
  params["max_depth"] = p.max_depth ? json(*p.max_depth) : json(nullptr);
  params["min_samples_leaf"] = p.min_samples_leaf;
  params["features_per_split"] = p.features_per_split ? json(*p.features_per_split) : json(nullptr);
  params["class_weights"] = std::string(mode_name(p.class_weights));
  json explicit_weights = json::object();
  for (const auto& [c, w] : p.explicit_weights) explicit_weights[std::string(to_string(c))] = w;
  params["explicit_weights"] = explicit_weights;
  params["bootstrap"] = p.bootstrap;
  params["seed"] = p.seed;
  j["params"] = params;

  json trees = json::array();
  for (const auto& t : m.trees()) {
    json nodes = json::array();
    for (const auto& n : t.nodes) {
      if (n.feature < 0) {
        nodes.push_back(json::array({-1, n.distribution}));
      } else {
        nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right}));
      }
    }
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j.dump() + "\n";
}

ForestModel load_model(std::string_view bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("corrupt model file: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("format", "") != kFormatTag) {
      throw FormatError("not a forest model file");
    }
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw FormatError("unsupported model version " + std::to_string(version) + " (expected " +
                        std::to_string(kModelFormatVersion) + ")");
    }
    const auto dim = j.at("dim").get<std::size_t>();
    std::vector<CellClass> classes;
    for (const auto& c : j.at("classes")) classes.push_back(class_from_json(c));
    if (classes.empty() || dim == 0) throw FormatError("model has no classes or zero dimension");

    ForestParams p;
    const auto& jp = j.at("params");
    p.n_trees = jp.at("n_trees").get<int>();
    if (!jp.at("max_depth").is_null()) p.max_depth = jp.at("max_depth").get<int>();
    p.min_samples_leaf = jp.at("min_samples_leaf").get<int>();
    if (!jp.at("features_per_split").is_null()) p.features_per_split = jp.at("features_per_split").get<int>();
    p.class_weights = parse_mode(jp.at("class_weights").get<std::string>());
    for (const auto& [name, w] : jp.at("explicit_weights").items()) {
      p.explicit_weights[class_from_json(json(name))] = w.get<double>();
    }
    p.bootstrap = jp.at("bootstrap").get<bool>();
    p.seed = jp.at("seed").get<std::uint64_t>();

    std::vector<DecisionTree> trees;
    for (const auto& jt : j.at("trees")) {
      DecisionTree t;
      for (const auto& jn : jt) {
        DecisionTree::Node n;
        if (jn.at(0).get<int>() < 0) {
          n.distribution = jn.at(1).get<std::vector<double>>();
          const double sum = std::accumulate(n.distribution.begin(), n.distribution.end(), 0.0);
          if (n.distribution.size() != classes.size() || !(sum > 0)) {
            throw FormatError("invalid leaf distribution");
          }
        } else {
          n.feature = jn.at(0).get<int>();
          n.threshold = jn.at(1).get<double>();
          n.left = jn.at(2).get<int>();
          n.right = jn.at(3).get<int>();
        }
        t.nodes.push_back(std::move(n));
      }
      const int size = static_cast<int>(t.nodes.size());
      if (size == 0) throw FormatError("empty tree");
      for (int i = 0; i < size; ++i) {
        const auto& n = t.nodes[i];
        if (n.feature < 0) continue;
        if (n.feature >= static_cast<int>(dim) || n.left <= i || n.right <= i || n.left >= size ||
            n.right >= size) {
          throw FormatError("invalid tree node " + std::to_string(i));
        }
      }
      trees.push_back(std::move(t));
    }
    if (trees.empty()) throw FormatError("model has no trees");
    return ForestModel(std::move(classes), dim, std::move(p), std::move(trees));
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt model file: ") + e.what());
  }
}

}  // namespace smear
