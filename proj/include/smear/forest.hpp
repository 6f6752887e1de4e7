#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smear/dataset.hpp"

namespace smear {

enum class ClassWeightMode : std::uint8_t { none, balanced, explicit_map };

struct ForestParams {
  int n_trees = 1000;
  std::optional<int> max_depth;          // unlimited when empty
  int min_samples_leaf = 1;
  std::optional<int> features_per_split;  // ceil(sqrt(D)) when empty
  ClassWeightMode class_weights = ClassWeightMode::none;
  std::map<CellClass, double> explicit_weights;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on a violated invariant.
  void validate() const;
};

/// Flat binary tree. Internal nodes send x[feature] <= threshold left.
struct DecisionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> distribution;  // leaves only: weighted class counts
  };
  std::vector<Node> nodes;

  const Node& leaf_for(std::span<const double> x) const;
};

struct Prediction {
  CellClass label = CellClass::rbc;
  std::vector<double> probabilities;  // aligned with ForestModel::classes()

  double probability_of(CellClass c, std::span<const CellClass> classes) const;
};

class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(std::vector<CellClass> classes, std::size_t dim, ForestParams params,
              std::vector<DecisionTree> trees);

  /// Distinct training labels in declaration order.
  const std::vector<CellClass>& classes() const { return classes_; }
  std::size_t dim() const { return dim_; }
  const ForestParams& params() const { return params_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  bool trained() const { return !trees_.empty(); }

  /// Mean of per-tree normalized leaf distributions; argmax label with ties
  /// going to the earlier class.
  Prediction predict(std::span<const double> x) const;

  /// Per-tree prediction (normalized leaf distribution of one tree).
  Prediction predict_tree(std::size_t tree, std::span<const double> x) const;

 private:
  std::vector<CellClass> classes_;
  std::size_t dim_ = 0;
  ForestParams params_;
  std::vector<DecisionTree> trees_;
};

ForestModel train_forest(const std::vector<std::vector<double>>& X, const std::vector<CellClass>& y,
                         const ForestParams& params);

/// Per-class weights for the given mode, indexed by CellClass. Classes absent
/// from y get weight 0.
std::vector<double> class_weights(const std::vector<CellClass>& y, const ForestParams& params);

/// Versioned JSON tree dump.
inline constexpr int kModelFormatVersion = 1;
std::string save_model(const ForestModel& m);
ForestModel load_model(std::string_view bytes);

// ---------------------------------------------------------------------------
// Split search, exposed for verification.

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // W_left * gini(left) + W_right * gini(right)

  bool found() const { return feature >= 0; }
};

/// Gini impurity 1 - sum (w_k / W)^2 of a class-weight vector.
double gini(std::span<const double> class_weight);

/// Best split among `features` for the samples `rows` of X. `labels` are
/// class slots, `weights` per-sample weights. Thresholds are midpoints between
/// consecutive distinct values; both children must hold at least
/// `min_samples_leaf` samples (counting multiplicity via `counts`). Ties keep
/// the earlier feature, then the smaller threshold.
SplitCandidate best_split(const std::vector<std::vector<double>>& X, std::span<const std::size_t> rows,
                          std::span<const int> labels, std::span<const double> weights,
                          std::span<const int> counts, std::size_t n_slots,
                          std::span<const int> features, int min_samples_leaf);

}  // namespace smear
