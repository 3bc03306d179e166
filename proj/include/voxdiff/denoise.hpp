#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "voxdiff/conv3d.hpp"
#include "voxdiff/rng.hpp"
#include "voxdiff/schedule.hpp"
#include "voxdiff/voxgrid.hpp"

namespace voxdiff {

// Channels: 0 noisy volume, 1 prior mask broadcast along depth,
// 2 prior fluorescence broadcast along depth, 3 constant alpha_bar_t.
struct DenoiserInput {
  Tensor4 channels;
  int t = 0;
  double alpha_bar = 0.0;
};

inline constexpr int kDenoiserInputChannels = 4;

DenoiserInput assemble_input(const VoxelGrid& x_bt, const Prior2D& prior, int t, const NoiseSchedule& schedule);

// Noise predictor eps_theta.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  // Throws NonFiniteOutput if the prediction contains NaN/Inf.
  virtual VoxelGrid predict(const DenoiserInput& input) const = 0;

  // Per-step reverse variance sigma_t^2 supplied by the model, if it has one.
  // Samplers fall back to the schedule's sigma_t when this is empty.
  virtual std::optional<double> reverse_variance(int /*t*/, const NoiseSchedule& /*schedule*/) const {
    return std::nullopt;
  }
};

// Closed-form E[eps | x_t] when x_0 ~ N(m, s^2 I):
//   sqrt(1 - abar) (x_t - sqrt(abar) m) / (abar s^2 + 1 - abar).
class GaussianOracleDenoiser final : public Denoiser {
 public:
  GaussianOracleDenoiser(double mean, double stddev) : mean_(mean), stddev_(stddev) {}
  VoxelGrid predict(const DenoiserInput& input) const override;

  // Exact Var[x_{t-1} | x_t] for Gaussian data:
  //   beta~_t + c_t^2 Var[x_0 | x_t],  c_t = sqrt(abar_{t-1}) beta_t / (1 - abar_t).
  std::optional<double> reverse_variance(int t, const NoiseSchedule& schedule) const override;

  double mean() const noexcept { return mean_; }
  double stddev() const noexcept { return stddev_; }

 private:
  double mean_;
  double stddev_;
};

// Gradients for each conv layer of a ConvDenoiser.
struct DenoiserGrads {
  std::array<Conv3dGrads, 3> layers;

  std::vector<std::span<double>> spans();
  std::vector<std::span<const double>> spans() const;
};

// conv(4 -> h) -> ReLU -> conv(h -> h) -> ReLU -> conv(h -> 1), 3x3x3 kernels,
// reflect padding. h defaults to 16.
class ConvDenoiser final : public Denoiser {
 public:
  explicit ConvDenoiser(int hidden = 16);
  // He-normal weights, zero biases.
  ConvDenoiser(int hidden, std::uint64_t seed);

  VoxelGrid predict(const DenoiserInput& input) const override;

  int hidden() const noexcept { return layers_[0].out_channels; }
  std::array<Conv3dLayer, 3>& layers() noexcept { return layers_; }
  const std::array<Conv3dLayer, 3>& layers() const noexcept { return layers_; }

  // Parameter views in a fixed order: w1, b1, w2, b2, w3, b3.
  std::vector<std::span<double>> parameters();
  std::size_t parameter_count() const noexcept;
  bool parameters_finite() const noexcept;

  void set_kernel_mode(KernelMode mode) noexcept { mode_ = mode; }
  KernelMode kernel_mode() const noexcept { return mode_; }

  friend bool operator==(const ConvDenoiser& a, const ConvDenoiser& b);

 private:
  std::array<Conv3dLayer, 3> layers_;
  KernelMode mode_ = KernelMode::Parallel;
};

struct LossAndGrads {
  double loss = 0.0;
  DenoiserGrads grads;
};

// Mean squared error between the prediction and eps_true, with exact
// gradients for every parameter.
LossAndGrads loss_and_grads(const ConvDenoiser& denoiser, const DenoiserInput& input, const VoxelGrid& epsilon_true);

// Loss only (forward pass); used by finite-difference checks.
double denoiser_loss(const ConvDenoiser& denoiser, const DenoiserInput& input, const VoxelGrid& epsilon_true);

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

// Standard bias-corrected Adam update, no weight decay. Moment buffers are
// shaped on first use.
void adam_step(AdamState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads);

struct LossRecord {
  std::uint64_t step;
  int t;
  double loss;
};

struct TrainConfig {
  int epochs = 1;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  // Steps cap; 0 means epochs * dataset size.
  std::uint64_t max_steps = 0;
};

// Batch size one: per epoch a seeded shuffle of the dataset, then for each
// sample a noised pair, its loss and gradients, and one Adam step.
std::vector<LossRecord> train(ConvDenoiser& denoiser, const std::vector<Sample>& dataset,
                              const NoiseSchedule& schedule, const TrainConfig& config);

// DNZ1 checkpoint: "DNZ1", u32 layer count, then per layer u32 in, u32 out,
// weights and biases as little-endian f32.
void save_checkpoint(const ConvDenoiser& denoiser, const std::filesystem::path& path);
ConvDenoiser load_checkpoint(const std::filesystem::path& path);

void write_loss_csv(const std::vector<LossRecord>& curve, const std::filesystem::path& path);

}  // namespace voxdiff
