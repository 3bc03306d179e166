#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "voxdiff/rng.hpp"
#include "voxdiff/voxgrid.hpp"

namespace voxdiff {

// |pred - gt| / gt. Throws ZeroGroundTruth unless gt > 0.
double relative_error(double pred_value, double gt_value);

// Stratified by label: each class is shuffled and dealt round-robin, the deal
// continuing across classes, so fold sizes and per-class counts differ by at most one.
// Throws InvalidArgument for n_folds < 2 and TooFewSamples when fewer samples than folds.
std::vector<int> assign_folds(const std::vector<std::string>& labels, int n_folds, Rng& rng);
void assign_folds(std::vector<Sample>& samples, int n_folds, Rng& rng);

inline constexpr std::array<std::string_view, 4> kMetricNames = {"volume", "surface_area", "roughness",
                                                                 "curvature"};

struct MetricRow {
  std::string sample_id;
  std::string model;
  std::string metric;
  double relative_error = 0.0;
};

struct MetricAggregate {
  std::string model;
  std::string metric;
  std::size_t count = 0;
  double median = 0.0;
  double mean = 0.0;
  // Population standard deviation.
  double stddev = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  std::vector<MetricAggregate> aggregates;

  const MetricAggregate& aggregate(std::string_view model, std::string_view metric) const;
};

// model -> sample id -> predicted grids. Each prediction instance contributes
// one row per metric (k predictions of one sample are pooled).
using PredictionSet = std::map<std::string, std::map<std::string, std::vector<VoxelGrid>>>;

// Throws MissingGroundTruth when a prediction's id has no ground-truth target.
MetricReport evaluate_models(const std::vector<Sample>& ground_truth, const PredictionSet& predictions);

// Aggregates recomputed from rows.
std::vector<MetricAggregate> aggregate_rows(const std::vector<MetricRow>& rows);

// Linear-interpolated quantile of unsorted values, q in [0, 1].
double quantile(std::vector<double> values, double q);

// sample,model,metric,relative_error
void write_report_csv(const MetricReport& report, const std::filesystem::path& path);
// One row per model; median/mean/std column triples per metric.
void write_summary_csv(const MetricReport& report, const std::filesystem::path& path);
// model,metric,min,q1,median,q3,max
void write_boxplot_csv(const MetricReport& report, const std::filesystem::path& path);

}  // namespace voxdiff
