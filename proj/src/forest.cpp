#include "voxdiff/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "csv_util.hpp"

namespace voxdiff {

double gini(const std::vector<double>& counts) {
  const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (n <= 0.0) return 0.0;
  double s = 0.0;
  for (double c : counts) s += (c / n) * (c / n);
  return 1.0 - s;
}

namespace {

int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

struct TreeBuilder {
  const std::vector<std::vector<double>>& x;
  const std::vector<int>& y;
  int n_classes;
  int max_depth;
  int max_features;
  Rng& rng;
  std::vector<TreeNode> nodes;

  int build(std::vector<std::size_t> rows, int depth) {
    TreeNode node;
    node.depth = depth;
    node.counts.assign(n_classes, 0.0);
    for (auto r : rows) node.counts[y[r]] += 1.0;
    const int id = static_cast<int>(nodes.size());
    nodes.push_back(node);

    const bool pure = std::count_if(node.counts.begin(), node.counts.end(), [](double c) { return c > 0; }) <= 1;
    if (depth >= max_depth || pure || rows.size() < 2) return id;

    // Random feature subset, scanned in ascending index order so ties favour the lowest index.
    const int d = static_cast<int>(x[rows[0]].size());
    std::vector<int> feats(d);
    std::iota(feats.begin(), feats.end(), 0);
    const int m = std::min(d, max_features);
    for (int i = 0; i < m; ++i) {
      const auto j = static_cast<int>(rng.uniform_int(i, d - 1));
      std::swap(feats[i], feats[j]);
    }
    feats.resize(m);
    std::sort(feats.begin(), feats.end());

    const double n = static_cast<double>(rows.size());
    double best_score = std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::pair<double, int>> col(rows.size());
    std::vector<double> left(n_classes), right(n_classes);
    for (int f : feats) {
      for (std::size_t k = 0; k < rows.size(); ++k) col[k] = {x[rows[k]][f], y[rows[k]]};
      std::sort(col.begin(), col.end());
      std::fill(left.begin(), left.end(), 0.0);
      right = node.counts;
      for (std::size_t k = 0; k + 1 < col.size(); ++k) {
        left[col[k].second] += 1.0;
        right[col[k].second] -= 1.0;
        if (!(col[k].first < col[k + 1].first)) continue;
        const double nl = static_cast<double>(k + 1);
        const double score = (nl * gini(left) + (n - nl) * gini(right)) / n;
        if (score < best_score) {
          best_score = score;
          best_feature = f;
          double thr = 0.5 * (col[k].first + col[k + 1].first);
          if (!(thr < col[k + 1].first)) thr = col[k].first;
          best_threshold = thr;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> lrows, rrows;
    for (auto r : rows) (x[r][best_feature] <= best_threshold ? lrows : rrows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(std::move(lrows), depth + 1);
    const int r = build(std::move(rrows), depth + 1);
    nodes[id].feature = best_feature;
    nodes[id].threshold = best_threshold;
    nodes[id].left = l;
    nodes[id].right = r;
    return id;
  }
};

void check_matrix(const std::vector<std::vector<double>>& x, std::size_t n_labels) {
  if (x.empty()) throw Error(Errc::DimMismatch, "no training rows");
  if (x.size() != n_labels) throw Error(Errc::DimMismatch, "feature and label counts differ");
  const std::size_t d = x[0].size();
  if (d == 0) throw Error(Errc::DimMismatch, "zero-length feature vectors");
  for (const auto& row : x) {
    if (row.size() != d) throw Error(Errc::DimMismatch, "feature vectors differ in length");
  }
}

std::vector<std::vector<double>> values_of(const std::vector<FeatureVector>& fv) {
  std::vector<std::vector<double>> x;
  x.reserve(fv.size());
  for (const auto& f : fv) x.push_back(f.values);
  return x;
}

}  // namespace

DecisionTree DecisionTree::fit(const std::vector<std::vector<double>>& x, const std::vector<int>& y, int n_classes,
                               const std::vector<std::size_t>& rows, int max_depth, int max_features, Rng& rng) {
  if (rows.empty()) throw Error(Errc::InvalidArgument, "tree needs at least one row");
  const int d = static_cast<int>(x[rows[0]].size());
  if (max_features <= 0) max_features = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
  TreeBuilder b{x, y, n_classes, max_depth, max_features, rng, {}};
  b.build(rows, 0);
  DecisionTree t;
  t.nodes_ = std::move(b.nodes);
  return t;
}

int DecisionTree::predict(const std::vector<double>& f) const {
  int i = 0;
  while (nodes_[i].feature >= 0) {
    i = f[nodes_[i].feature] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
  }
  return argmax_lowest(nodes_[i].counts);
}

int DecisionTree::depth() const noexcept {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

ForestModel train_forest(const std::vector<std::vector<double>>& x, const std::vector<std::string>& labels,
                         const ForestParams& params) {
  check_matrix(x, labels.size());
  if (params.n_estimators < 1 || params.max_depth < 0) throw Error(Errc::InvalidArgument, "bad forest parameters");
  ForestModel model;
  model.params = params;
  model.n_features = x[0].size();
  model.classes = labels;
  std::sort(model.classes.begin(), model.classes.end());
  model.classes.erase(std::unique(model.classes.begin(), model.classes.end()), model.classes.end());
  if (model.classes.size() < 2) throw Error(Errc::SingleClass, "training labels contain a single class");
  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y[i] = static_cast<int>(std::lower_bound(model.classes.begin(), model.classes.end(), labels[i]) -
                            model.classes.begin());
  }
  const int n_classes = static_cast<int>(model.classes.size());
  const std::size_t n = x.size();
  model.trees.resize(static_cast<std::size_t>(params.n_estimators));
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < params.n_estimators; ++t) {
    Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
    model.trees[t] = DecisionTree::fit(x, y, n_classes, rows, params.max_depth, params.max_features, rng);
  }
  return model;
}

ForestModel train_forest(const std::vector<FeatureVector>& features, const std::vector<std::string>& labels,
                         const ForestParams& params) {
  return train_forest(values_of(features), labels, params);
}

std::string predict_class(const ForestModel& model, const std::vector<double>& features) {
  if (features.size() != model.n_features) throw Error(Errc::DimMismatch, "feature vector length mismatch");
  std::vector<double> votes(model.classes.size(), 0.0);
  for (const auto& t : model.trees) votes[t.predict(features)] += 1.0;
  return model.classes[argmax_lowest(votes)];
}

std::string predict_class(const ForestModel& model, const FeatureVector& features) {
  return predict_class(model, features.values);
}

F1Scores f1_scores(const std::vector<std::string>& y_true, const std::vector<std::string>& y_pred) {
  if (y_true.size() != y_pred.size()) throw Error(Errc::LengthMismatch, "label sequences differ in length");
  if (y_true.empty()) throw Error(Errc::LengthMismatch, "no labels");
  std::set<std::string> all(y_true.begin(), y_true.end());
  all.insert(y_pred.begin(), y_pred.end());
  F1Scores out;
  std::map<std::string, double> support;
  for (const auto& c : y_true) support[c] += 1.0;
  for (const auto& c : all) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      const bool t = y_true[i] == c, p = y_pred[i] == c;
      tp += t && p;
      fp += !t && p;
      fn += t && !p;
    }
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    out.per_class[c] = prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
  }
  for (const auto& [c, s] : support) {
    out.macro += out.per_class[c];
    out.weighted += s * out.per_class[c];
  }
  out.macro /= static_cast<double>(support.size());
  out.weighted /= static_cast<double>(y_true.size());
  return out;
}

std::vector<std::vector<int>> confusion_matrix(const std::vector<std::string>& y_true,
                                               const std::vector<std::string>& y_pred,
                                               const std::vector<std::string>& classes) {
  if (y_true.size() != y_pred.size()) throw Error(Errc::LengthMismatch, "label sequences differ in length");
  auto index = [&](const std::string& c) {
    auto it = std::find(classes.begin(), classes.end(), c);
    if (it == classes.end()) throw Error(Errc::InvalidArgument, "label '" + c + "' not in class list");
    return static_cast<std::size_t>(it - classes.begin());
  };
  std::vector<std::vector<int>> m(classes.size(), std::vector<int>(classes.size(), 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) ++m[index(y_true[i])][index(y_pred[i])];
  return m;
}

namespace {

FoldResult score_fold(int fold, const std::string& arm, const ForestModel& model,
                      const std::vector<std::vector<double>>& test_x, const std::vector<std::string>& test_y,
                      const std::vector<std::string>& classes, std::size_t train_size) {
  std::vector<std::string> pred;
  pred.reserve(test_x.size());
  for (const auto& row : test_x) pred.push_back(predict_class(model, row));
  const F1Scores f1 = f1_scores(test_y, pred);
  return FoldResult{fold, arm, f1.macro, f1.weighted, train_size, confusion_matrix(test_y, pred, classes)};
}

std::vector<std::string> sorted_classes(std::vector<std::string> labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

}  // namespace

std::vector<FoldResult> cross_validate(const std::vector<FeatureRow>& rows, int n_folds, const ForestParams& params) {
  if (n_folds < 2) throw Error(Errc::InvalidArgument, "need at least 2 folds");
  std::vector<std::string> labels;
  for (const auto& r : rows) {
    if (r.fold < 0 || r.fold >= n_folds) throw Error(Errc::InvalidArgument, "fold index out of range in row " + r.id);
    labels.push_back(r.class_label);
  }
  const auto classes = sorted_classes(labels);
  std::vector<FoldResult> out;
  for (int f = 0; f < n_folds; ++f) {
    std::vector<std::vector<double>> tx, sx;
    std::vector<std::string> ty, sy;
    for (const auto& r : rows) {
      (r.fold == f ? sx : tx).push_back(r.features.values);
      (r.fold == f ? sy : ty).push_back(r.class_label);
    }
    if (sx.empty()) throw Error(Errc::TooFewSamples, "fold " + std::to_string(f) + " has no test rows");
    ForestParams p = params;
    p.seed = derive_seed(params.seed, static_cast<std::uint64_t>(f));
    const ForestModel model = train_forest(tx, ty, p);
    out.push_back(score_fold(f, "baseline", model, sx, sy, classes, tx.size()));
  }
  return out;
}

std::set<std::string> AccessLog::train_reads(int fold) const {
  std::set<std::string> ids;
  for (const auto& e : entries_) {
    if (e.fold == fold && e.phase == Phase::Train) ids.insert(e.id);
  }
  return ids;
}

double AugmentationReport::mean_macro(const std::string& arm) const {
  double s = 0.0;
  int n = 0;
  for (const auto& r : results) {
    if (r.arm == arm) {
      s += r.f1_macro;
      ++n;
    }
  }
  return n ? s / n : 0.0;
}

bool AugmentationReport::leakage_free(const std::vector<Sample>& dataset) const {
  std::set<int> folds;
  for (const auto& r : results) folds.insert(r.fold);
  for (int f : folds) {
    const auto reads = log.train_reads(f);
    for (const auto& s : dataset) {
      if (s.fold == f && reads.count(s.id)) return false;
    }
  }
  return true;
}

AugmentationReport augmentation_experiment(const std::vector<Sample>& dataset,
                                           const std::vector<FeatureVector>& features,
                                           const AugmentationConfig& config, const Reconstructor& reconstruct) {
  if (features.size() != dataset.size()) throw Error(Errc::DimMismatch, "one feature vector per sample required");
  if (config.k_aug < 0) throw Error(Errc::InvalidArgument, "k_aug must be non-negative");
  AugmentationReport report;
  std::vector<std::string> labels;
  for (const auto& s : dataset) {
    if (s.fold < 0 || s.fold >= config.n_folds) throw Error(Errc::InvalidArgument, "sample " + s.id + " has no valid fold");
    labels.push_back(s.class_label);
  }
  report.classes = sorted_classes(labels);
  for (const auto& c : config.minority_classes) {
    if (!std::binary_search(report.classes.begin(), report.classes.end(), c)) {
      throw Error(Errc::InvalidArgument, "minority class '" + c + "' absent from the dataset");
    }
  }

  // Reconstructions depend only on the sample, so folds that share a training sample reuse them.
  std::map<std::string, std::vector<FeatureVector>> cache;
  using Phase = AccessLog::Phase;

  for (int f = 0; f < config.n_folds; ++f) {
    std::vector<std::vector<double>> tx, sx;
    std::vector<std::string> ty, sy;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset[i].fold == f) continue;
      report.log.record(f, Phase::Train, dataset[i].id, "features");
      tx.push_back(features[i].values);
      ty.push_back(dataset[i].class_label);
    }
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset[i].fold != f) continue;
      report.log.record(f, Phase::Test, dataset[i].id, "features");
      sx.push_back(features[i].values);
      sy.push_back(dataset[i].class_label);
    }
    if (sx.empty()) throw Error(Errc::TooFewSamples, "fold " + std::to_string(f) + " has no test samples");

    ForestParams p = config.forest;
    p.seed = derive_seed(config.forest.seed, static_cast<std::uint64_t>(f));
    const ForestModel base = train_forest(tx, ty, p);
    report.results.push_back(score_fold(f, "baseline", base, sx, sy, report.classes, tx.size()));

    auto ax = tx;
    auto ay = ty;
    if (config.k_aug > 0) {
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        const Sample& s = dataset[i];
        if (s.fold == f || !config.minority_classes.count(s.class_label)) continue;
        report.log.record(f, Phase::Train, s.id, "prior");
        auto it = cache.find(s.id);
        if (it == cache.end()) {
          std::vector<FeatureVector> fv;
          for (const auto& grid : reconstruct(s.id, s.prior, config.k_aug)) fv.push_back(extract_features(grid, s.prior));
          if (fv.size() != static_cast<std::size_t>(config.k_aug)) {
            throw Error(Errc::InvalidArgument, "reconstructor returned the wrong number of shapes");
          }
          it = cache.emplace(s.id, std::move(fv)).first;
        }
        for (const auto& v : it->second) {
          ax.push_back(v.values);
          ay.push_back(s.class_label);
        }
      }
    }
    const ForestModel aug = train_forest(ax, ay, p);
    report.results.push_back(score_fold(f, "augmented", aug, sx, sy, report.classes, ax.size()));
  }
  return report;
}

void write_fold_report_csv(const std::vector<FoldResult>& results, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << "fold,arm,f1_macro,f1_weighted\n";
  for (const auto& r : results) {
    out << r.fold << ',' << r.arm << ',' << csv::num(r.f1_macro) << ',' << csv::num(r.f1_weighted) << '\n';
  }
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

void write_confusion_csvs(const std::vector<FoldResult>& results, const std::vector<std::string>& classes,
                          const std::filesystem::path& dir) {
  for (const auto& r : results) {
    const auto path = dir / ("confusion_" + r.arm + "_fold" + std::to_string(r.fold) + ".csv");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
    out << "true";
    for (const auto& c : classes) out << ',' << c;
    out << '\n';
    for (std::size_t i = 0; i < classes.size(); ++i) {
      out << classes[i];
      for (int v : r.confusion[i]) out << ',' << v;
      out << '\n';
    }
    if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
  }
}

}  // namespace voxdiff
