#include "voxdiff/sample.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "voxdiff/diffuse.hpp"

namespace voxdiff {

void SamplerConfig::validate() const {
  if (!schedule || !denoiser) throw Error(Errc::InvalidArgument, "sampler needs a schedule and a denoiser");
  if (clamp && !(clamp->lo < clamp->hi)) throw Error(Errc::InvalidArgument, "clamp requires lo < hi");
  if (trajectory_stride < 1) throw Error(Errc::InvalidArgument, "trajectory stride must be >= 1");
}

namespace {

double step_sigma(int t, const SamplerConfig& config) {
  if (config.variance == VarianceSource::Model) {
    if (auto v = config.denoiser->reverse_variance(t, *config.schedule)) return std::sqrt(std::max(0.0, *v));
  }
  return config.schedule->sigma(t);
}

VoxelGrid reverse_update(const VoxelGrid& x_t, const Prior2D& prior, int t, const SamplerConfig& config,
                         const VoxelGrid* z) {
  const auto c = config.schedule->lookup(t);
  const VoxelGrid eps = config.denoiser->predict(assemble_input(x_t, prior, t, *config.schedule));
  const double inv_sqrt_alpha = 1.0 / std::sqrt(c.alpha);
  const double eps_coef = (1.0 - c.alpha) / std::sqrt(1.0 - c.alpha_bar);
  const double sigma = t > 1 && z ? step_sigma(t, config) : 0.0;

  VoxelGrid out(x_t.dims());
  const double* x = x_t.data();
  const double* e = eps.data();
  double* o = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = inv_sqrt_alpha * (x[i] - eps_coef * e[i]);
    if (sigma > 0.0) v += sigma * z->values()[i];
    if (config.clamp) v = std::clamp(v, config.clamp->lo, config.clamp->hi);
    o[i] = v;
  }
  if (!out.all_finite()) throw Error(Errc::NonFiniteState, "reverse chain diverged at t=" + std::to_string(t));
  return out;
}

}  // namespace

VoxelGrid reverse_step(const VoxelGrid& x_t, const Prior2D& prior, int t, const SamplerConfig& config, Rng& rng) {
  config.validate();
  config.schedule->lookup(t);
  if (t > 1) {
    const VoxelGrid z = gaussian_grid(x_t.dims(), rng);
    return reverse_update(x_t, prior, t, config, &z);
  }
  return reverse_update(x_t, prior, t, config, nullptr);
}

VoxelGrid reverse_step_with_noise(const VoxelGrid& x_t, const Prior2D& prior, int t, const SamplerConfig& config,
                                  const VoxelGrid& z) {
  config.validate();
  if (z.dims() != x_t.dims()) throw Error(Errc::DimMismatch, "noise grid differs in shape");
  return reverse_update(x_t, prior, t, config, &z);
}

ChainResult sample_chain(const Prior2D& prior, Dims3 dims, const SamplerConfig& config, Rng& rng) {
  config.validate();
  if (dims.depth < 2 || dims.height < 2 || dims.width < 2) throw Error(Errc::InvalidGrid, "sample dims must be >= 2");
  if (prior.height() != dims.height || prior.width() != dims.width) {
    throw Error(Errc::DimMismatch, "prior plane does not match requested dims");
  }
  const int T = config.schedule->steps();
  ChainResult result;
  VoxelGrid x = gaussian_grid(dims, rng);
  if (config.record_trajectory) result.trajectory.emplace_back(T, x);
  for (int t = T; t >= 1; --t) {
    x = reverse_step(x, prior, t, config, rng);
    const int now = t - 1;
    if (config.record_trajectory && (now == 0 || now % config.trajectory_stride == 0)) {
      result.trajectory.emplace_back(now, x);
    }
  }
  result.shape = decode_binary(x);
  result.raw = std::move(x);
  return result;
}

VoxelGrid sample_shape(const Prior2D& prior, Dims3 dims, const SamplerConfig& config, Rng& rng) {
  return sample_chain(prior, dims, config, rng).shape;
}

std::vector<VoxelGrid> sample_k(const Prior2D& prior, Dims3 dims, const SamplerConfig& config, int k) {
  if (k < 1) throw Error(Errc::InvalidArgument, "k must be >= 1");
  config.validate();
  std::vector<VoxelGrid> out(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(j)));
    out[static_cast<std::size_t>(j)] = sample_shape(prior, dims, config, rng);
  }
  return out;
}

void write_trajectory(const ChainResult& chain, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  char name[32];
  for (const auto& [t, grid] : chain.trajectory) {
    std::snprintf(name, sizeof name, "step_%04d.vox", t);
    write_voxel_file(grid, dir / name, VoxelDtype::F32);
  }
}

}  // namespace voxdiff
