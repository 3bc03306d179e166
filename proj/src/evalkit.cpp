#include "voxdiff/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "csv_util.hpp"
#include "voxdiff/morpho.hpp"

namespace voxdiff {

double relative_error(double pred_value, double gt_value) {
  if (!(gt_value > 0.0)) throw Error(Errc::ZeroGroundTruth, "ground-truth value must be positive");
  return std::abs(pred_value - gt_value) / gt_value;
}

std::vector<int> assign_folds(const std::vector<std::string>& labels, int n_folds, Rng& rng) {
  if (n_folds < 2) throw Error(Errc::InvalidArgument, "need at least 2 folds");
  if (labels.size() < static_cast<std::size_t>(n_folds)) {
    throw Error(Errc::TooFewSamples, "fewer samples than folds");
  }
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::vector<int> folds(labels.size(), 0);
  std::size_t deal = 0;
  for (auto& [label, idx] : by_class) {
    for (std::size_t k = idx.size(); k > 1; --k) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 1));
      std::swap(idx[k - 1], idx[j]);
    }
    for (std::size_t i : idx) folds[i] = static_cast<int>(deal++ % static_cast<std::size_t>(n_folds));
  }
  return folds;
}

void assign_folds(std::vector<Sample>& samples, int n_folds, Rng& rng) {
  std::vector<std::string> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(s.class_label);
  const auto folds = assign_folds(labels, n_folds, rng);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].fold = folds[i];
}

const MetricAggregate& MetricReport::aggregate(std::string_view model, std::string_view metric) const {
  for (const auto& a : aggregates) {
    if (a.model == model && a.metric == metric) return a;
  }
  throw Error(Errc::InvalidArgument, "no aggregate for " + std::string(model) + "/" + std::string(metric));
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw Error(Errc::InvalidArgument, "quantile of an empty set");
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<MetricAggregate> aggregate_rows(const std::vector<MetricRow>& rows) {
  // Keyed by (model, metric) in first-appearance order.
  std::vector<MetricAggregate> out;
  std::vector<std::vector<double>> values;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const MetricAggregate& a) { return a.model == r.model && a.metric == r.metric; });
    if (it == out.end()) {
      out.push_back(MetricAggregate{r.model, r.metric});
      values.emplace_back();
      it = out.end() - 1;
    }
    values[static_cast<std::size_t>(it - out.begin())].push_back(r.relative_error);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto& v = values[k];
    const double n = static_cast<double>(v.size());
    out[k].count = v.size();
    out[k].mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - out[k].mean) * (x - out[k].mean);
    out[k].stddev = std::sqrt(ss / n);
    out[k].median = quantile(v, 0.5);
  }
  return out;
}

namespace {

std::array<double, 4> metric_values(const ShapeMetrics& m) {
  return {m.volume, m.surface_area, m.roughness, m.curvature};
}

}  // namespace

MetricReport evaluate_models(const std::vector<Sample>& ground_truth, const PredictionSet& predictions) {
  std::unordered_map<std::string, const Sample*> gt_by_id;
  for (const auto& s : ground_truth) gt_by_id.emplace(s.id, &s);

  struct Job {
    const std::string* model;
    const std::string* id;
    const VoxelGrid* grid;
  };
  std::vector<Job> jobs;
  std::vector<std::string> gt_needed;
  for (const auto& [model, by_id] : predictions) {
    for (const auto& [id, grids] : by_id) {
      auto it = gt_by_id.find(id);
      if (it == gt_by_id.end() || !it->second->target) {
        throw Error(Errc::MissingGroundTruth, "no ground truth for prediction '" + id + "'");
      }
      gt_needed.push_back(id);
      for (const auto& g : grids) jobs.push_back(Job{&model, &id, &g});
    }
  }
  std::sort(gt_needed.begin(), gt_needed.end());
  gt_needed.erase(std::unique(gt_needed.begin(), gt_needed.end()), gt_needed.end());

  std::vector<std::array<double, 4>> gt_metrics(gt_needed.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < gt_needed.size(); ++i) {
    gt_metrics[i] = metric_values(shape_metrics(*gt_by_id.at(gt_needed[i])->target));
  }
  std::unordered_map<std::string, std::size_t> gt_slot;
  for (std::size_t i = 0; i < gt_needed.size(); ++i) gt_slot.emplace(gt_needed[i], i);

  std::vector<std::array<double, 4>> errors(jobs.size());
  std::vector<std::string> failures(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto& gt = gt_metrics[gt_slot.at(*jobs[j].id)];
    // An empty prediction has no surface; score it against zero-valued metrics.
    std::array<double, 4> pred{};
    try {
      if (jobs[j].grid->foreground_count() > 0) pred = metric_values(shape_metrics(*jobs[j].grid));
      for (int m = 0; m < 4; ++m) errors[j][m] = relative_error(pred[m], gt[m]);
    } catch (const std::exception& e) {
      failures[j] = e.what();
    }
  }
  for (const auto& f : failures) {
    if (!f.empty()) throw Error(Errc::InvalidArgument, "metric extraction failed: " + f);
  }

  MetricReport report;
  report.rows.reserve(jobs.size() * 4);
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    for (int m = 0; m < 4; ++m) {
      report.rows.push_back(MetricRow{*jobs[j].id, *jobs[j].model, std::string(kMetricNames[m]), errors[j][m]});
    }
  }
  report.aggregates = aggregate_rows(report.rows);
  return report;
}

void write_report_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << "sample,model,metric,relative_error\n";
  for (const auto& r : report.rows) {
    out << r.sample_id << ',' << r.model << ',' << r.metric << ',' << csv::num(r.relative_error) << '\n';
  }
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

void write_summary_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << "model";
  for (auto m : kMetricNames) out << ',' << m << "_median," << m << "_mean," << m << "_std";
  out << '\n';
  std::vector<std::string> models;
  for (const auto& a : report.aggregates) {
    if (std::find(models.begin(), models.end(), a.model) == models.end()) models.push_back(a.model);
  }
  for (const auto& model : models) {
    out << model;
    for (auto m : kMetricNames) {
      const auto& a = report.aggregate(model, m);
      out << ',' << csv::num(a.median) << ',' << csv::num(a.mean) << ',' << csv::num(a.stddev);
    }
    out << '\n';
  }
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

void write_boxplot_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << "model,metric,min,q1,median,q3,max\n";
  for (const auto& a : report.aggregates) {
    std::vector<double> v;
    for (const auto& r : report.rows) {
      if (r.model == a.model && r.metric == a.metric) v.push_back(r.relative_error);
    }
    out << a.model << ',' << a.metric;
    for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) out << ',' << csv::num(quantile(v, q));
    out << '\n';
  }
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

}  // namespace voxdiff
