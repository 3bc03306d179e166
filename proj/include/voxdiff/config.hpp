#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "voxdiff/schedule.hpp"

namespace voxdiff {

// Flat key=value run settings. Defaults: T=1000, linear betas 1e-4..0.02,
// Adam lr 1e-4, batch 1, k=5 samples per prior, 1000 trees of depth 10.
struct RunConfig {
  std::uint64_t seed = 0;
  int grid_size = 32;
  int steps = 1000;
  double beta_start = kDefaultBetaStart;
  double beta_end = kDefaultBetaEnd;
  VarianceMode variance_mode = VarianceMode::Posterior;
  int hidden = 16;
  int epochs = 1;
  double lr = 1e-4;
  int batch = 1;
  std::uint64_t max_steps = 0;
  int k = 5;
  std::optional<std::pair<double, double>> clamp;
  int n_estimators = 1000;
  int max_depth = 10;
  int n_folds = 5;
  int k_aug = 5;
  std::set<std::string> minority_classes;

  // Throws BadConfig when a field is outside its documented range.
  void validate() const;

  // Every key with its canonical text value, in file order.
  std::vector<std::pair<std::string, std::string>> entries() const;

  NoiseSchedule schedule() const;
};

// '#' starts a comment; blank lines are skipped. Unknown or repeated keys,
// unparsable values and out-of-range values throw BadConfig.
RunConfig parse_config(const std::string& text);
RunConfig read_config(const std::filesystem::path& path);
void write_config(const RunConfig& config, const std::filesystem::path& path);

}  // namespace voxdiff
