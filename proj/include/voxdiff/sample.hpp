#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "voxdiff/denoise.hpp"
#include "voxdiff/rng.hpp"
#include "voxdiff/schedule.hpp"
#include "voxdiff/voxgrid.hpp"

namespace voxdiff {

enum class VarianceSource {
  Schedule,  // sigma_t from the noise schedule
  Model,     // Denoiser::reverse_variance, falling back to the schedule
};

struct ClampRange {
  double lo;
  double hi;
};

struct SamplerConfig {
  const NoiseSchedule* schedule = nullptr;
  const Denoiser* denoiser = nullptr;
  // Applied to every intermediate state in encoded units; off by default.
  std::optional<ClampRange> clamp;
  bool record_trajectory = false;
  // Snapshot every n-th step when recording (t = T and t = 0 always kept).
  int trajectory_stride = 1;
  VarianceSource variance = VarianceSource::Schedule;
  std::uint64_t seed = 0;

  void validate() const;
};

// x_{t-1} = (x_t - (1 - alpha_t) / sqrt(1 - abar_t) * eps_theta) / sqrt(alpha_t) + sigma_t z,
// with z ~ N(0, I) for t > 1 and z = 0 at t = 1.
VoxelGrid reverse_step(const VoxelGrid& x_t, const Prior2D& prior, int t, const SamplerConfig& config, Rng& rng);

// Same update with a caller-supplied z (ignored at t = 1).
VoxelGrid reverse_step_with_noise(const VoxelGrid& x_t, const Prior2D& prior, int t, const SamplerConfig& config,
                                  const VoxelGrid& z);

struct ChainResult {
  // Final x_0 in encoded units, before decoding / thresholding.
  VoxelGrid raw;
  // Binary shape: (raw + 1) / 2 clamped and thresholded at 0.5.
  VoxelGrid shape;
  // (t, state) pairs from t = T down to 0 when recording.
  std::vector<std::pair<int, VoxelGrid>> trajectory;
};

// x_T ~ N(0, I), then reverse_step for t = T..1.
ChainResult sample_chain(const Prior2D& prior, Dims3 dims, const SamplerConfig& config, Rng& rng);

VoxelGrid sample_shape(const Prior2D& prior, Dims3 dims, const SamplerConfig& config, Rng& rng);

// k independent chains; chain j runs on seed derive_seed(config.seed, j).
std::vector<VoxelGrid> sample_k(const Prior2D& prior, Dims3 dims, const SamplerConfig& config, int k);

// Writes step_%04d.vox (f32) per recorded trajectory entry.
void write_trajectory(const ChainResult& chain, const std::filesystem::path& dir);

}  // namespace voxdiff
