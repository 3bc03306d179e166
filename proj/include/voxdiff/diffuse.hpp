#pragma once

#include <vector>

#include "voxdiff/rng.hpp"
#include "voxdiff/schedule.hpp"
#include "voxdiff/voxgrid.hpp"

namespace voxdiff {

struct NoisedPair {
  VoxelGrid x_t;
  VoxelGrid epsilon;
  int t = 0;
  Prior2D prior;
};

// Binary shapes enter the diffusion in {-1, +1} and leave via (x + 1) / 2,
// clamped to [0, 1] and thresholded at 0.5.
VoxelGrid encode_binary(const VoxelGrid& binary);
VoxelGrid decode_binary(const VoxelGrid& encoded);

// Fills a grid with independent standard normal draws.
VoxelGrid gaussian_grid(Dims3 dims, Rng& rng);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, for a caller-supplied eps.
VoxelGrid forward_with_noise(const VoxelGrid& x0, int t, const NoiseSchedule& schedule, const VoxelGrid& epsilon);

// Closed-form jump to step t with a fresh eps drawn from rng.
NoisedPair forward_to_t(const VoxelGrid& x0, int t, const NoiseSchedule& schedule, Rng& rng);

// One Markov transition: draw from N(sqrt(1 - beta_t) x_prev, beta_t I).
VoxelGrid forward_step(const VoxelGrid& x_prev, int t, const NoiseSchedule& schedule, Rng& rng);

// One encoded noised pair per sample with t ~ Uniform{1..T}. Each sample's
// noise comes from its own child generator seeded by (rng draw, sample id).
std::vector<NoisedPair> training_batch(const std::vector<Sample>& samples, const NoiseSchedule& schedule, Rng& rng);

}  // namespace voxdiff
