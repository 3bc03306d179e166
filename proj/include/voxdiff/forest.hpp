#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "voxdiff/morpho.hpp"
#include "voxdiff/rng.hpp"
#include "voxdiff/voxgrid.hpp"

namespace voxdiff {

// Gini impurity of a class-count vector; 0 for an empty vector.
double gini(const std::vector<double>& counts);

struct TreeNode {
  // feature < 0 marks a leaf.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int depth = 0;
  std::vector<double> counts;
};

// CART classifier over class indices 0..n_classes-1; x[feature] <= threshold goes left.
class DecisionTree {
 public:
  DecisionTree() = default;

  // rows index into x / y (a bootstrap resample may repeat indices).
  // max_features <= 0 means ceil(sqrt(d)).
  static DecisionTree fit(const std::vector<std::vector<double>>& x, const std::vector<int>& y, int n_classes,
                          const std::vector<std::size_t>& rows, int max_depth, int max_features, Rng& rng);

  int predict(const std::vector<double>& features) const;
  int depth() const noexcept;
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

 private:
  std::vector<TreeNode> nodes_;
};

struct ForestParams {
  int n_estimators = 1000;
  int max_depth = 10;
  // <= 0 means ceil(sqrt(d)).
  int max_features = 0;
  std::uint64_t seed = 0;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  // Sorted class labels; a class's index is its position here.
  std::vector<std::string> classes;
  std::size_t n_features = 0;
  ForestParams params;
};

// Each tree sees a same-size bootstrap resample drawn from its own seed
// derive_seed(params.seed, tree index). Throws SingleClass, DimMismatch.
ForestModel train_forest(const std::vector<std::vector<double>>& features, const std::vector<std::string>& labels,
                         const ForestParams& params);
ForestModel train_forest(const std::vector<FeatureVector>& features, const std::vector<std::string>& labels,
                         const ForestParams& params);

// Majority vote of the trees; ties go to the smallest class index. Throws DimMismatch.
std::string predict_class(const ForestModel& model, const std::vector<double>& features);
std::string predict_class(const ForestModel& model, const FeatureVector& features);

struct F1Scores {
  double macro = 0.0;
  double weighted = 0.0;
  std::map<std::string, double> per_class;
};

// Macro averages over the classes present in y_true; weighted uses their support.
// Throws LengthMismatch on unequal lengths or empty input.
F1Scores f1_scores(const std::vector<std::string>& y_true, const std::vector<std::string>& y_pred);

// Rows are true classes, columns predictions, both in `classes` order.
std::vector<std::vector<int>> confusion_matrix(const std::vector<std::string>& y_true,
                                               const std::vector<std::string>& y_pred,
                                               const std::vector<std::string>& classes);

struct FoldResult {
  int fold = 0;
  std::string arm;
  double f1_macro = 0.0;
  double f1_weighted = 0.0;
  std::size_t train_size = 0;
  std::vector<std::vector<int>> confusion;
};

// Plain cross-validation over the fold column of a feature table (arm "baseline").
// The forest seed for fold f is derive_seed(params.seed, f).
std::vector<FoldResult> cross_validate(const std::vector<FeatureRow>& rows, int n_folds, const ForestParams& params);

// Records every read of a sample's prior, target or features, tagged with the
// fold and the phase (train or test) in which it happened.
class AccessLog {
 public:
  enum class Phase { Train, Test };
  struct Entry {
    int fold;
    Phase phase;
    std::string id;
    std::string what;
  };

  void record(int fold, Phase phase, const std::string& id, const std::string& what) {
    entries_.push_back(Entry{fold, phase, id, what});
  }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  // Ids read during the train phase of `fold`.
  std::set<std::string> train_reads(int fold) const;

 private:
  std::vector<Entry> entries_;
};

// k reconstructions of a sample from its prior. The id lets implementations
// derive per-sample seeds.
using Reconstructor = std::function<std::vector<VoxelGrid>(const std::string& id, const Prior2D& prior, int k)>;

struct AugmentationConfig {
  std::set<std::string> minority_classes;
  int k_aug = 5;
  int n_folds = 5;
  ForestParams forest;
};

struct AugmentationReport {
  std::vector<std::string> classes;
  // Baseline and augmented result per fold, in fold order.
  std::vector<FoldResult> results;
  AccessLog log;

  double mean_macro(const std::string& arm) const;
  // True when no test-split id was read during any fold's train phase.
  bool leakage_free(const std::vector<Sample>& dataset) const;
};

// Per fold: baseline forest on ground-truth features of the train split; the
// augmented arm adds k_aug reconstructions for every train-split minority
// sample, labelled with that sample's class. Both arms share the fold's forest
// seed and are scored on the ground-truth features of the test split.
// `features[i]` are the ground-truth features of dataset[i].
AugmentationReport augmentation_experiment(const std::vector<Sample>& dataset,
                                           const std::vector<FeatureVector>& features,
                                           const AugmentationConfig& config, const Reconstructor& reconstruct);

// fold,arm,f1_macro,f1_weighted
void write_fold_report_csv(const std::vector<FoldResult>& results, const std::filesystem::path& path);
// One CSV per result: confusion_<arm>_fold<k>.csv, header "true" then class names.
void write_confusion_csvs(const std::vector<FoldResult>& results, const std::vector<std::string>& classes,
                          const std::filesystem::path& dir);

}  // namespace voxdiff
