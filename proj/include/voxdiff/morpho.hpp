#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "voxdiff/mesh.hpp"
#include "voxdiff/voxgrid.hpp"

namespace voxdiff {

// Registry-ordered feature values; names mirror feature_names().
struct FeatureVector {
  std::vector<std::string> names;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
};

// Fixed registry order (documented in FEATURES.md).
const std::vector<std::string>& feature_names();

// Binary grid and its conditioning image -> registry-ordered features.
// Throws EmptyForeground when the grid has no foreground voxel or the mask no pixel.
FeatureVector extract_features(const VoxelGrid& grid, const Prior2D& prior);

// The four evaluation metrics. Volume is the voxel count; the mesh-based
// metrics use the smoothed metric mesh; curvature is the total absolute angle deficit.
struct ShapeMetrics {
  double volume = 0.0;
  double surface_area = 0.0;
  double roughness = 0.0;
  double curvature = 0.0;
};

ShapeMetrics shape_metrics(const VoxelGrid& grid);

// Pi^(1/3) (6 V)^(2/3) / A.
double sphericity(double volume, double area);

struct FeatureRow {
  std::string id;
  std::string class_label;
  int fold = 0;
  FeatureVector features;
};

// Header: id,class,fold followed by the registry names.
void write_features_csv(const std::vector<FeatureRow>& rows, const std::filesystem::path& path);
std::vector<FeatureRow> read_features_csv(const std::filesystem::path& path);

}  // namespace voxdiff
