// Command-line pipelines: gen-data, train, sample, baseline, features, eval,
// classify, augment-exp. Every command writes into a staging directory and
// moves the results into place only after it has succeeded.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "json.hpp"
#include "voxdiff/baseline.hpp"
#include "voxdiff/config.hpp"
#include "voxdiff/denoise.hpp"
#include "voxdiff/evalkit.hpp"
#include "voxdiff/forest.hpp"
#include "voxdiff/morpho.hpp"
#include "voxdiff/sample.hpp"
#include "voxdiff/voxgrid.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace voxdiff;

namespace {

constexpr const char* kVersion = "0.1.0";

// Flag combinations CLI11 cannot check by itself; reported with exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Files are written under `stage` and moved into `dest` on commit; an
// uncommitted stage is deleted, along with `dest` if this run created it empty.
class Staging {
 public:
  Staging(fs::path dest, const std::string& tag) : dest_(std::move(dest)) {
    created_dest_ = !fs::exists(dest_);
    fs::create_directories(dest_);
    stage_ = dest_ / (".staging-" + tag);
    fs::remove_all(stage_);
    fs::create_directories(stage_);
  }
  Staging(const Staging&) = delete;
  Staging& operator=(const Staging&) = delete;
  ~Staging() {
    if (committed_) return;
    std::error_code ec;
    fs::remove_all(stage_, ec);
    if (created_dest_ && fs::is_empty(dest_, ec)) fs::remove(dest_, ec);
  }

  const fs::path& dir() const noexcept { return stage_; }
  fs::path operator/(const fs::path& rel) const { return stage_ / rel; }

  void commit() {
    for (const auto& entry : fs::directory_iterator(stage_)) {
      const fs::path target = dest_ / entry.path().filename();
      fs::remove_all(target);
      fs::rename(entry.path(), target);
    }
    fs::remove(stage_);
    committed_ = true;
  }

 private:
  fs::path dest_;
  fs::path stage_;
  bool created_dest_ = false;
  bool committed_ = false;
};

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

json config_json(const RunConfig& c) {
  json j = json::object();
  for (const auto& [k, v] : c.entries()) j[k] = v;
  return j;
}

void write_provenance(const fs::path& path, const std::string& command, const std::vector<std::string>& argv,
                      std::uint64_t seed, const json& config, const json& extra = json::object()) {
  json j;
  j["command"] = command;
  j["argv"] = argv;
  j["seed"] = seed;
  j["config"] = config;
  j["versions"] = {{"voxdiff", kVersion},
                   {"compiler", __VERSION__},
                   {"cxx_standard", __cplusplus},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"openmp", _OPENMP}};
  j["threads"] = omp_get_max_threads();
  j["results"] = extra;
  j["created_utc"] = utc_now();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

RunConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
  RunConfig c = path.empty() ? RunConfig{} : read_config(path);
  if (seed) c.seed = *seed;
  return c;
}

std::vector<Sample> load_manifest_samples(const fs::path& manifest, bool with_targets) {
  return load_samples(read_manifest(manifest), manifest, with_targets);
}

Dims3 volume_dims(const Sample& s, int depth) {
  if (s.target) return s.target->dims();
  return Dims3{depth > 0 ? depth : s.prior.height(), s.prior.height(), s.prior.width()};
}

std::string prediction_name(const std::string& id, int j) { return id + "_s" + std::to_string(j) + ".vox"; }

// "<id>_s<j>.vox" -> id; empty when the name does not follow that pattern.
std::string id_of_prediction(const fs::path& file) {
  if (file.extension() != ".vox") return {};
  const std::string stem = file.stem().string();
  const auto pos = stem.rfind("_s");
  if (pos == std::string::npos || pos + 2 >= stem.size()) return {};
  if (stem.find_first_not_of("0123456789", pos + 2) != std::string::npos) return {};
  return stem.substr(0, pos);
}

std::vector<fs::path> sorted_vox_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::IoFailure, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && !id_of_prediction(e.path()).empty()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

// Runs f(i) for i in [0, n) in parallel and rethrows the first failure by index.
template <class F>
void parallel_for_each(std::size_t n, F&& f) {
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      f(i);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw std::runtime_error(e);
  }
}

SamplerConfig sampler_for(const RunConfig& cfg, const NoiseSchedule& schedule, const Denoiser& net) {
  SamplerConfig sc;
  sc.schedule = &schedule;
  sc.denoiser = &net;
  if (cfg.clamp) sc.clamp = ClampRange{cfg.clamp->first, cfg.clamp->second};
  sc.seed = cfg.seed;
  return sc;
}

// ---- commands ----

struct GenDataArgs {
  std::vector<std::string> classes;
  std::vector<int> counts;
  int size = 32;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen_data(const GenDataArgs& a, const std::vector<std::string>& argv) {
  if (a.classes.size() != a.counts.size()) throw UsageError("--classes and --counts differ in length");
  if (a.size < 16 || a.size > 64) throw UsageError("--size must be in [16, 64]");
  std::vector<ShapeClass> classes;
  std::set<std::string> seen;
  for (const auto& c : a.classes) {
    try {
      classes.push_back(parse_shape_class(c));
    } catch (const Error&) {
      throw UsageError("unknown class '" + c + "'");
    }
    if (!seen.insert(c).second) throw UsageError("class '" + c + "' listed twice");
  }
  for (int n : a.counts) {
    if (n < 1 || n > 100000) throw UsageError("--counts entries must be in [1, 100000]");
  }

  Staging stage(a.out, "gen-data");
  fs::create_directories(stage / "voxels");
  fs::create_directories(stage / "priors");
  std::vector<Sample> samples;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (int i = 0; i < a.counts[c]; ++i) {
      const std::uint64_t s = derive_seed(a.seed, hash_string(a.classes[c]), static_cast<std::uint64_t>(i));
      Sample sample = synth_shape(classes[c], a.size, s);
      char id[96];
      std::snprintf(id, sizeof id, "%s_%04d", a.classes[c].c_str(), i);
      sample.id = id;
      samples.push_back(std::move(sample));
    }
  }
  Rng fold_rng(derive_seed(a.seed, hash_string("folds")));
  assign_folds(samples, 5, fold_rng);

  Manifest manifest;
  for (const auto& s : samples) {
    const std::string vox = "voxels/" + s.id + ".vox";
    const std::string prior = "priors/" + s.id + ".prior";
    write_voxel_file(*s.target, stage / vox, VoxelDtype::U8);
    write_prior_file(s.prior, stage / prior);
    manifest.records.push_back(ManifestRecord{s.id, vox, prior, s.class_label, s.fold});
  }
  write_manifest(manifest, stage / "manifest.csv");
  json cfg = {{"classes", a.classes}, {"counts", a.counts}, {"size", a.size}};
  write_provenance(stage / "run.json", "gen-data", argv, a.seed, cfg, {{"samples", samples.size()}});
  stage.commit();
  std::cerr << "gen-data: wrote " << samples.size() << " samples to " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  std::string manifest;
  std::string config;
  std::string out_checkpoint;
  std::optional<std::uint64_t> seed;
  std::optional<int> exclude_fold;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  const RunConfig cfg = load_config(a.config, a.seed);
  const NoiseSchedule schedule = cfg.schedule();
  std::vector<Sample> data;
  for (auto& s : load_manifest_samples(a.manifest, true)) {
    if (!a.exclude_fold || s.fold != *a.exclude_fold) data.push_back(std::move(s));
  }
  if (data.empty()) throw Error(Errc::InvalidArgument, "no training samples selected");

  ConvDenoiser net(cfg.hidden, derive_seed(cfg.seed, hash_string("init")));
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.lr = cfg.lr;
  tc.seed = derive_seed(cfg.seed, hash_string("train"));
  tc.max_steps = cfg.max_steps;
  const auto curve = train(net, data, schedule, tc);

  const fs::path ckpt = fs::absolute(a.out_checkpoint);
  const std::string name = ckpt.filename().string();
  Staging stage(ckpt.parent_path(), "train-" + name);
  save_checkpoint(net, stage / name);
  write_loss_csv(curve, stage / (name + ".loss.csv"));
  write_schedule_csv(schedule, stage / (name + ".schedule.csv"));
  double last = 0.0;
  const std::size_t tail = std::min<std::size_t>(100, curve.size());
  for (std::size_t i = curve.size() - tail; i < curve.size(); ++i) last += curve[i].loss / static_cast<double>(tail);
  json extra = {{"samples", data.size()}, {"steps", curve.size()}, {"mean_loss_last_100", last}};
  if (a.exclude_fold) extra["excluded_fold"] = *a.exclude_fold;
  write_provenance(stage / (name + ".run.json"), "train", argv, cfg.seed, config_json(cfg), extra);
  stage.commit();
  std::cerr << "train: " << curve.size() << " steps, final mean loss " << last << '\n';
  return 0;
}

struct SampleArgs {
  std::string checkpoint;
  std::string manifest;
  std::string config;
  std::string out;
  std::optional<int> k;
  int depth = 0;
  std::optional<int> fold;
  std::optional<std::uint64_t> seed;
  int trajectory_stride = 0;
};

int cmd_sample(const SampleArgs& a, const std::vector<std::string>& argv) {
  const RunConfig cfg = load_config(a.config, a.seed);
  const int k = a.k.value_or(cfg.k);
  if (k < 1) throw UsageError("--k must be >= 1");
  const NoiseSchedule schedule = cfg.schedule();
  const ConvDenoiser net = load_checkpoint(a.checkpoint);
  std::vector<Sample> data;
  for (auto& s : load_manifest_samples(a.manifest, false)) {
    if (!a.fold || s.fold == *a.fold) data.push_back(std::move(s));
  }
  Staging stage(a.out, "sample");
  std::size_t written = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sample& s = data[i];
    SamplerConfig sc = sampler_for(cfg, schedule, net);
    sc.seed = derive_seed(cfg.seed, hash_string(s.id));
    const Dims3 dims = volume_dims(s, a.depth);
    const auto shapes = sample_k(s.prior, dims, sc, k);
    for (int j = 0; j < k; ++j) {
      write_voxel_file(shapes[j], stage / prediction_name(s.id, j), VoxelDtype::U8);
      ++written;
    }
    if (a.trajectory_stride > 0) {
      SamplerConfig tc = sc;
      tc.record_trajectory = true;
      tc.trajectory_stride = a.trajectory_stride;
      Rng rng(derive_seed(sc.seed, 0));
      write_trajectory(sample_chain(s.prior, dims, tc, rng), stage / "trajectories" / s.id);
    }
    std::cerr << "sample: " << (i + 1) << "/" << data.size() << '\r';
  }
  std::cerr << '\n';
  write_provenance(stage / "run.json", "sample", argv, cfg.seed, config_json(cfg),
                   {{"checkpoint", a.checkpoint}, {"priors", data.size()}, {"shapes", written}});
  stage.commit();
  return 0;
}

struct BaselineArgs {
  std::string manifest;
  std::string fit;
  std::string out;
  int depth = 0;
  std::optional<int> fold;
};

int cmd_baseline(const BaselineArgs& a, const std::vector<std::string>& argv) {
  if (a.fit != "cylinder" && a.fit != "ellipsoid") throw UsageError("--fit must be cylinder or ellipsoid");
  std::vector<Sample> data;
  for (auto& s : load_manifest_samples(a.manifest, false)) {
    if (!a.fold || s.fold == *a.fold) data.push_back(std::move(s));
  }
  Staging stage(a.out, "baseline");
  for (const auto& s : data) {
    const int depth = a.depth > 0 ? a.depth : s.prior.height();
    const VoxelGrid g = a.fit == "cylinder" ? cylinder_fit(s.prior.mask, depth) : ellipsoid_fit(s.prior.mask, depth);
    write_voxel_file(g, stage / prediction_name(s.id, 0), VoxelDtype::U8);
  }
  write_provenance(stage / "run.json", "baseline", argv, 0, {{"fit", a.fit}, {"depth", a.depth}},
                   {{"shapes", data.size()}});
  stage.commit();
  return 0;
}

struct FeaturesArgs {
  std::string in;
  std::string manifest;
  std::string out;
};

int cmd_features(const FeaturesArgs& a, const std::vector<std::string>& argv) {
  std::vector<FeatureRow> rows;
  if (fs::is_directory(a.in)) {
    if (a.manifest.empty()) throw UsageError("--manifest is required when --in is a prediction directory");
    std::map<std::string, Sample> by_id;
    for (auto& s : load_manifest_samples(a.manifest, false)) by_id.emplace(s.id, std::move(s));
    const auto files = sorted_vox_files(a.in);
    rows.resize(files.size());
    for (std::size_t i = 0; i < files.size(); ++i) {
      const std::string id = id_of_prediction(files[i]);
      auto it = by_id.find(id);
      if (it == by_id.end()) throw Error(Errc::MissingGroundTruth, "no manifest entry for " + files[i].string());
      rows[i].id = files[i].stem().string();
      rows[i].class_label = it->second.class_label;
      rows[i].fold = it->second.fold;
    }
    parallel_for_each(files.size(), [&](std::size_t i) {
      rows[i].features = extract_features(read_voxel_file(files[i]), by_id.at(id_of_prediction(files[i])).prior);
    });
  } else {
    const auto data = load_manifest_samples(a.in, true);
    rows.resize(data.size());
    parallel_for_each(data.size(), [&](std::size_t i) {
      if (!data[i].target) throw Error(Errc::MissingTarget, "sample " + data[i].id + " has no voxel file");
      rows[i] = FeatureRow{data[i].id, data[i].class_label, data[i].fold, extract_features(*data[i].target, data[i].prior)};
    });
  }
  Staging stage(a.out, "features");
  write_features_csv(rows, stage / "features.csv");
  write_provenance(stage / "run.json", "features", argv, 0, {{"in", a.in}}, {{"rows", rows.size()}});
  stage.commit();
  return 0;
}

struct EvalArgs {
  std::string gt;
  std::vector<std::string> pred_dirs;
  std::vector<std::string> names;
  std::string out;
};

int cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
  if (!a.names.empty() && a.names.size() != a.pred_dirs.size()) {
    throw UsageError("--names and --pred-dirs differ in length");
  }
  const auto gt = load_manifest_samples(a.gt, true);
  PredictionSet preds;
  for (std::size_t d = 0; d < a.pred_dirs.size(); ++d) {
    const std::string name =
        a.names.empty() ? fs::path(a.pred_dirs[d]).lexically_normal().filename().string() : a.names[d];
    if (preds.count(name)) throw UsageError("model name '" + name + "' used twice");
    auto& by_id = preds[name];
    for (const auto& f : sorted_vox_files(a.pred_dirs[d])) by_id[id_of_prediction(f)].push_back(read_voxel_file(f));
  }
  const MetricReport report = evaluate_models(gt, preds);
  Staging stage(a.out, "eval");
  write_report_csv(report, stage / "report.csv");
  write_summary_csv(report, stage / "summary.csv");
  write_boxplot_csv(report, stage / "boxplot.csv");
  json med = json::object();
  for (const auto& agg : report.aggregates) med[agg.model][agg.metric] = agg.median;
  write_provenance(stage / "run.json", "eval", argv, 0, {{"gt", a.gt}, {"pred_dirs", a.pred_dirs}},
                   {{"rows", report.rows.size()}, {"median_relative_error", med}});
  stage.commit();
  return 0;
}

struct ClassifyArgs {
  std::string features;
  std::string config;
  std::string out;
  std::optional<int> folds;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_estimators;
  std::optional<int> max_depth;
};

ForestParams forest_params(const RunConfig& cfg, const std::optional<int>& n, const std::optional<int>& depth) {
  ForestParams p;
  p.n_estimators = n.value_or(cfg.n_estimators);
  p.max_depth = depth.value_or(cfg.max_depth);
  p.seed = derive_seed(cfg.seed, hash_string("forest"));
  if (p.n_estimators < 1 || p.max_depth < 1) throw UsageError("forest size and depth must be >= 1");
  return p;
}

int cmd_classify(const ClassifyArgs& a, const std::vector<std::string>& argv) {
  const RunConfig cfg = load_config(a.config, a.seed);
  const int folds = a.folds.value_or(cfg.n_folds);
  if (folds < 2) throw UsageError("--folds must be >= 2");
  const ForestParams params = forest_params(cfg, a.n_estimators, a.max_depth);
  const auto rows = read_features_csv(a.features);
  const auto results = cross_validate(rows, folds, params);
  std::vector<std::string> classes;
  for (const auto& r : rows) classes.push_back(r.class_label);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  Staging stage(a.out, "classify");
  write_fold_report_csv(results, stage / "report.csv");
  write_confusion_csvs(results, classes, stage.dir());
  double macro = 0.0;
  for (const auto& r : results) macro += r.f1_macro / static_cast<double>(results.size());
  write_provenance(stage / "run.json", "classify", argv, cfg.seed, config_json(cfg),
                   {{"rows", rows.size()}, {"mean_f1_macro", macro}});
  stage.commit();
  return 0;
}

struct AugmentArgs {
  std::string manifest;
  std::string checkpoint;
  std::string config;
  std::string out;
  std::optional<int> k;
  std::vector<std::string> minority;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_estimators;
  std::optional<int> max_depth;
};

int cmd_augment(const AugmentArgs& a, const std::vector<std::string>& argv) {
  const RunConfig cfg = load_config(a.config, a.seed);
  const int k_aug = a.k.value_or(cfg.k_aug);
  if (k_aug < 0) throw UsageError("--k must be >= 0");
  const NoiseSchedule schedule = cfg.schedule();
  const ConvDenoiser net = load_checkpoint(a.checkpoint);
  const auto data = load_manifest_samples(a.manifest, true);

  AugmentationConfig ac;
  ac.k_aug = k_aug;
  ac.n_folds = 5;
  ac.forest = forest_params(cfg, a.n_estimators, a.max_depth);
  if (!a.minority.empty()) {
    ac.minority_classes.insert(a.minority.begin(), a.minority.end());
  } else if (!cfg.minority_classes.empty()) {
    ac.minority_classes = cfg.minority_classes;
  } else {
    // Every class except the largest one.
    std::map<std::string, int> counts;
    for (const auto& s : data) ++counts[s.class_label];
    auto largest = std::max_element(counts.begin(), counts.end(),
                                    [](const auto& x, const auto& y) { return x.second < y.second; });
    for (const auto& [c, n] : counts) {
      if (c != largest->first) ac.minority_classes.insert(c);
    }
  }

  std::vector<FeatureVector> features(data.size());
  parallel_for_each(data.size(), [&](std::size_t i) {
    if (!data[i].target) throw Error(Errc::MissingTarget, "sample " + data[i].id + " has no voxel file");
    features[i] = extract_features(*data[i].target, data[i].prior);
  });

  std::map<std::string, Dims3> dims_of;
  for (const auto& s : data) dims_of[s.id] = s.target->dims();
  const Reconstructor reconstruct = [&](const std::string& id, const Prior2D& prior, int k) {
    SamplerConfig sc = sampler_for(cfg, schedule, net);
    sc.seed = derive_seed(cfg.seed, hash_string(id));
    std::cerr << "augment-exp: reconstructing " << id << '\n';
    return sample_k(prior, dims_of.at(id), sc, k);
  };
  const AugmentationReport report = augmentation_experiment(data, features, ac, reconstruct);
  const bool clean = report.leakage_free(data);
  if (!clean) throw Error(Errc::InvalidArgument, "access log shows test-split reads during training");

  Staging stage(a.out, "augment-exp");
  write_fold_report_csv(report.results, stage / "report.csv");
  write_confusion_csvs(report.results, report.classes, stage.dir());
  {
    std::ofstream log(stage / "access_log.csv", std::ios::binary);
    log << "fold,phase,id,what\n";
    for (const auto& e : report.log.entries()) {
      log << e.fold << ',' << (e.phase == AccessLog::Phase::Train ? "train" : "test") << ',' << e.id << ','
          << e.what << '\n';
    }
    if (!log) throw Error(Errc::IoFailure, "cannot write access log");
  }
  json cfgj = config_json(cfg);
  cfgj["k_aug"] = k_aug;
  cfgj["minority_classes"] = std::vector<std::string>(ac.minority_classes.begin(), ac.minority_classes.end());
  write_provenance(stage / "run.json", "augment-exp", argv, cfg.seed, cfgj,
                   {{"mean_f1_macro_baseline", report.mean_macro("baseline")},
                    {"mean_f1_macro_augmented", report.mean_macro("augmented")},
                    {"leakage_free", clean}});
  stage.commit();
  std::cerr << "augment-exp: mean macro F1 baseline " << report.mean_macro("baseline") << ", augmented "
            << report.mean_macro("augmented") << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Conditional 3D voxel diffusion, baselines, morphometrics and classification"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* c_gen = app.add_subcommand("gen-data", "Generate synthetic shapes, priors and a manifest");
  c_gen->add_option("--classes", gen.classes, "Shape classes (ball, biconcave, spiky, elongated)")
      ->required()
      ->delimiter(',');
  c_gen->add_option("--counts", gen.counts, "Samples per class")->required()->delimiter(',');
  c_gen->add_option("--size", gen.size, "Grid side length")->capture_default_str();
  c_gen->add_option("--seed", gen.seed, "Base seed")->capture_default_str();
  c_gen->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the conditional denoiser");
  c_train->add_option("--manifest", tr.manifest)->required()->check(CLI::ExistingFile);
  c_train->add_option("--config", tr.config)->check(CLI::ExistingFile);
  c_train->add_option("--out-checkpoint", tr.out_checkpoint)->required();
  c_train->add_option("--seed", tr.seed, "Overrides the config seed");
  c_train->add_option("--exclude-fold", tr.exclude_fold, "Hold out this fold")->check(CLI::Range(0, 4));

  SampleArgs sm;
  auto* c_sample = app.add_subcommand("sample", "Sample k shapes per prior");
  c_sample->add_option("--checkpoint", sm.checkpoint)->required()->check(CLI::ExistingFile);
  c_sample->add_option("--manifest", sm.manifest)->required()->check(CLI::ExistingFile);
  c_sample->add_option("--config", sm.config)->check(CLI::ExistingFile);
  c_sample->add_option("--k", sm.k, "Shapes per prior (default: config k)");
  c_sample->add_option("--out", sm.out)->required();
  c_sample->add_option("--depth", sm.depth, "Grid depth when the manifest has no voxels");
  c_sample->add_option("--fold", sm.fold, "Only priors of this fold")->check(CLI::Range(0, 4));
  c_sample->add_option("--seed", sm.seed, "Overrides the config seed");
  c_sample->add_option("--trajectory-stride", sm.trajectory_stride, "Export every n-th state of chain 0");

  BaselineArgs bl;
  auto* c_base = app.add_subcommand("baseline", "Cylinder or ellipsoid extrusion of each prior mask");
  c_base->add_option("--manifest", bl.manifest)->required()->check(CLI::ExistingFile);
  c_base->add_option("--fit", bl.fit)->required();
  c_base->add_option("--out", bl.out)->required();
  c_base->add_option("--depth", bl.depth, "Grid depth (default: mask height)");
  c_base->add_option("--fold", bl.fold, "Only priors of this fold")->check(CLI::Range(0, 4));

  FeaturesArgs ft;
  auto* c_feat = app.add_subcommand("features", "Extract the morphological feature table");
  c_feat->add_option("--in", ft.in, "Manifest, or a directory of predicted shapes")->required()->check(CLI::ExistingPath);
  c_feat->add_option("--manifest", ft.manifest, "Labels and priors for a prediction directory")
      ->check(CLI::ExistingFile);
  c_feat->add_option("--out", ft.out)->required();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Relative metric errors against ground truth");
  c_eval->add_option("--gt", ev.gt)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--pred-dirs", ev.pred_dirs)->required()->delimiter(',');
  c_eval->add_option("--names", ev.names, "Model names (default: directory names)")->delimiter(',');
  c_eval->add_option("--out", ev.out)->required();

  ClassifyArgs cl;
  auto* c_cls = app.add_subcommand("classify", "Random-forest cross-validation on a feature table");
  c_cls->add_option("--features", cl.features)->required()->check(CLI::ExistingFile);
  c_cls->add_option("--folds", cl.folds, "Number of folds (default: config n_folds)");
  c_cls->add_option("--config", cl.config)->check(CLI::ExistingFile);
  c_cls->add_option("--out", cl.out)->required();
  c_cls->add_option("--seed", cl.seed, "Overrides the config seed");
  c_cls->add_option("--n-estimators", cl.n_estimators);
  c_cls->add_option("--max-depth", cl.max_depth);

  AugmentArgs au;
  auto* c_aug = app.add_subcommand("augment-exp", "Baseline vs diffusion-augmented classification");
  c_aug->add_option("--manifest", au.manifest)->required()->check(CLI::ExistingFile);
  c_aug->add_option("--checkpoint", au.checkpoint)->required()->check(CLI::ExistingFile);
  c_aug->add_option("--config", au.config)->check(CLI::ExistingFile);
  c_aug->add_option("--k", au.k, "Reconstructions per minority sample (default: config k_aug)");
  c_aug->add_option("--out", au.out)->required();
  c_aug->add_option("--minority", au.minority, "Minority classes (default: all but the largest)")->delimiter(',');
  c_aug->add_option("--seed", au.seed, "Overrides the config seed");
  c_aug->add_option("--n-estimators", au.n_estimators);
  c_aug->add_option("--max-depth", au.max_depth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (c_gen->parsed()) return cmd_gen_data(gen, args);
    if (c_train->parsed()) return cmd_train(tr, args);
    if (c_sample->parsed()) return cmd_sample(sm, args);
    if (c_base->parsed()) return cmd_baseline(bl, args);
    if (c_feat->parsed()) return cmd_features(ft, args);
    if (c_eval->parsed()) return cmd_eval(ev, args);
    if (c_cls->parsed()) return cmd_classify(cl, args);
    if (c_aug->parsed()) return cmd_augment(au, args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == Errc::BadConfig ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
