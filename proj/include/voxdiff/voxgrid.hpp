#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "voxdiff/error.hpp"

namespace voxdiff {

struct Dims3 {
  int depth = 0;
  int height = 0;
  int width = 0;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(depth) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  friend bool operator==(const Dims3&, const Dims3&) = default;
};

// Dense 3D scalar field stored row-major as (depth, height, width).
class VoxelGrid {
 public:
  VoxelGrid() = default;
  explicit VoxelGrid(Dims3 dims, double fill = 0.0);
  VoxelGrid(Dims3 dims, std::vector<double> values);

  const Dims3& dims() const noexcept { return dims_; }
  int depth() const noexcept { return dims_.depth; }
  int height() const noexcept { return dims_.height; }
  int width() const noexcept { return dims_.width; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::size_t index(int z, int y, int x) const noexcept {
    return (static_cast<std::size_t>(z) * dims_.height + y) * dims_.width + x;
  }
  double& at(int z, int y, int x) noexcept { return values_[index(z, y, x)]; }
  double at(int z, int y, int x) const noexcept { return values_[index(z, y, x)]; }

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  bool all_finite() const noexcept;
  bool is_binary() const noexcept;
  // Number of voxels with value > 0.5.
  std::size_t foreground_count() const noexcept;

  // Throws InvalidGrid on non-finite values or bad dims.
  void validate() const;

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

 private:
  Dims3 dims_{};
  std::vector<double> values_;
};

// Single-channel 2D image, row-major (height, width).
struct Image2D {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Image2D() = default;
  Image2D(int h, int w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int y, int x) noexcept { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const noexcept { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t foreground_count() const noexcept;

  friend bool operator==(const Image2D&, const Image2D&) = default;
};

// Two-channel conditioning image: fluorescence intensity plus binary mask.
struct Prior2D {
  Image2D fluorescence;
  Image2D mask;

  int height() const noexcept { return mask.height; }
  int width() const noexcept { return mask.width; }

  // Throws DimMismatch / InvalidGrid; `require_foreground` adds the model-input check.
  void validate(bool require_foreground = true) const;

  friend bool operator==(const Prior2D&, const Prior2D&) = default;
};

struct Sample {
  std::string id;
  Prior2D prior;
  std::optional<VoxelGrid> target;
  std::string class_label;
  int fold = 0;
};

enum class VoxelDtype : std::uint8_t { U8 = 0, F32 = 1 };

inline constexpr int kMaxFileDim = 1024;
inline constexpr std::size_t kVoxHeaderBytes = 20;

// VOX3 layout: "VOX3", dtype tag (1 byte), 3 reserved zero bytes, three u32
// little-endian dims (depth, height, width), then the row-major payload.
std::vector<std::uint8_t> encode_voxel(const VoxelGrid& grid, VoxelDtype dtype);
VoxelGrid decode_voxel(const std::vector<std::uint8_t>& bytes);

void write_voxel_file(const VoxelGrid& grid, const std::filesystem::path& path, VoxelDtype dtype);
VoxelGrid read_voxel_file(const std::filesystem::path& path);

// Priors are stored as a 2-slice f32 VOX3 volume: slice 0 fluorescence, slice 1 mask.
void write_prior_file(const Prior2D& prior, const std::filesystem::path& path);
Prior2D read_prior_file(const std::filesystem::path& path);

// Mask = central slice (index depth/2) of a binary grid. Fluorescence is taken
// from `intensity` when provided, otherwise it equals the mask.
Prior2D extract_prior(const VoxelGrid& grid, const VoxelGrid* intensity = nullptr);

struct ManifestRecord {
  std::string id;
  std::string voxel_path;
  std::string prior_path;
  std::string class_label;
  int fold = 0;
};

struct Manifest {
  std::vector<ManifestRecord> records;

  // Unique ids; folds in 0..4; every fold present once there are >= 5 records.
  void validate() const;
};

inline constexpr std::string_view kManifestHeader = "id,voxel_path,prior_path,class,fold";

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

// Loads the samples named in a manifest; relative paths resolve against the
// manifest's directory. Targets are loaded when `with_targets` is set.
std::vector<Sample> load_samples(const Manifest& manifest, const std::filesystem::path& manifest_path,
                                 bool with_targets = true);

// Synthetic shape classes standing in for the cell morphologies.
enum class ShapeClass { Ball, Biconcave, Spiky, Elongated };

std::string_view shape_class_name(ShapeClass c) noexcept;
ShapeClass parse_shape_class(std::string_view name);

struct SynthParams {
  // Base radius (ball, biconcave, spiky) or the short semi-axis (elongated).
  double radius = 0.0;
  // Elongated only: long / short semi-axis ratio.
  double axis_ratio = 1.0;
  int bumps = 0;
};

struct SynthResult {
  Sample sample;
  SynthParams params;
};

// Deterministic for (class, size, seed). size must lie in [16, 64].
SynthResult synth_shape_detailed(ShapeClass cls, int size, std::uint64_t seed);
Sample synth_shape(ShapeClass cls, int size, std::uint64_t seed);

// Number of 6-connected foreground components of a binary grid.
int count_components6(const VoxelGrid& grid);

}  // namespace voxdiff
