#include "voxdiff/diffuse.hpp"

#include <algorithm>
#include <cmath>

namespace voxdiff {

VoxelGrid encode_binary(const VoxelGrid& binary) {
  VoxelGrid out(binary.dims());
  std::transform(binary.values().begin(), binary.values().end(), out.values().begin(),
                 [](double v) { return v > 0.5 ? 1.0 : -1.0; });
  return out;
}

VoxelGrid decode_binary(const VoxelGrid& encoded) {
  VoxelGrid out(encoded.dims());
  std::transform(encoded.values().begin(), encoded.values().end(), out.values().begin(), [](double v) {
    const double unit = std::clamp((v + 1.0) * 0.5, 0.0, 1.0);
    return unit > 0.5 ? 1.0 : 0.0;
  });
  return out;
}

VoxelGrid gaussian_grid(Dims3 dims, Rng& rng) {
  VoxelGrid out(dims);
  for (double& v : out.values()) v = rng.normal();
  return out;
}

VoxelGrid forward_with_noise(const VoxelGrid& x0, int t, const NoiseSchedule& schedule, const VoxelGrid& epsilon) {
  if (x0.dims() != epsilon.dims()) throw Error(Errc::DimMismatch, "noise grid differs in shape");
  const double abar = schedule.alpha_bar(t);
  const double signal = std::sqrt(abar);
  const double noise = std::sqrt(1.0 - abar);
  VoxelGrid out(x0.dims());
  const double* a = x0.data();
  const double* e = epsilon.data();
  double* o = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] = signal * a[i] + noise * e[i];
  return out;
}

NoisedPair forward_to_t(const VoxelGrid& x0, int t, const NoiseSchedule& schedule, Rng& rng) {
  schedule.lookup(t);
  if (!x0.all_finite()) throw Error(Errc::InvalidGrid, "x0 has non-finite values");
  NoisedPair pair;
  pair.t = t;
  pair.epsilon = gaussian_grid(x0.dims(), rng);
  pair.x_t = forward_with_noise(x0, t, schedule, pair.epsilon);
  return pair;
}

VoxelGrid forward_step(const VoxelGrid& x_prev, int t, const NoiseSchedule& schedule, Rng& rng) {
  const double beta = schedule.beta(t);
  const double keep = std::sqrt(1.0 - beta);
  const double sd = std::sqrt(beta);
  VoxelGrid out(x_prev.dims());
  const double* a = x_prev.data();
  double* o = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] = keep * a[i] + sd * rng.normal();
  return out;
}

std::vector<NoisedPair> training_batch(const std::vector<Sample>& samples, const NoiseSchedule& schedule, Rng& rng) {
  for (const auto& s : samples) {
    if (!s.target) throw Error(Errc::MissingTarget, "sample " + s.id + " has no target");
  }
  struct Draw {
    int t;
    std::uint64_t seed;
  };
  std::vector<Draw> draws(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    draws[i].t = static_cast<int>(rng.uniform_int(1, schedule.steps()));
    draws[i].seed = derive_seed(rng.next_u64(), hash_string(samples[i].id));
  }
  std::vector<NoisedPair> batch(samples.size());
#pragma omp parallel for schedule(dynamic) if (samples.size() > 1)
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng child(draws[i].seed);
    batch[i] = forward_to_t(encode_binary(*samples[i].target), draws[i].t, schedule, child);
    batch[i].prior = samples[i].prior;
  }
  return batch;
}

}  // namespace voxdiff
