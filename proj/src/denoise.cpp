#include "voxdiff/denoise.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "voxdiff/diffuse.hpp"

namespace voxdiff {

DenoiserInput assemble_input(const VoxelGrid& x_bt, const Prior2D& prior, int t, const NoiseSchedule& schedule) {
  if (prior.height() != x_bt.height() || prior.width() != x_bt.width() ||
      prior.fluorescence.height != prior.mask.height || prior.fluorescence.width != prior.mask.width) {
    throw Error(Errc::DimMismatch, "prior plane does not match the volume's (height, width)");
  }
  const double abar = schedule.alpha_bar(t);
  DenoiserInput in;
  in.t = t;
  in.alpha_bar = abar;
  in.channels = Tensor4(kDenoiserInputChannels, x_bt.dims());
  const std::size_t plane = static_cast<std::size_t>(x_bt.height()) * x_bt.width();
  std::copy(x_bt.values().begin(), x_bt.values().end(), in.channels.channel(0));
  for (int z = 0; z < x_bt.depth(); ++z) {
    std::copy(prior.mask.values.begin(), prior.mask.values.end(), in.channels.channel(1) + z * plane);
    std::copy(prior.fluorescence.values.begin(), prior.fluorescence.values.end(),
              in.channels.channel(2) + z * plane);
  }
  std::fill(in.channels.channel(3), in.channels.channel(3) + x_bt.size(), abar);
  return in;
}

namespace {

VoxelGrid grid_from_channel(const Tensor4& t, int c) {
  VoxelGrid g(t.dims);
  std::copy(t.channel(c), t.channel(c) + t.plane(), g.values().begin());
  return g;
}

void require_finite(const VoxelGrid& g) {
  if (!g.all_finite()) throw Error(Errc::NonFiniteOutput, "denoiser produced non-finite values");
}

void relu_inplace(Tensor4& t) {
  for (double& v : t.data) v = v > 0.0 ? v : 0.0;
}

}  // namespace

VoxelGrid GaussianOracleDenoiser::predict(const DenoiserInput& input) const {
  const double abar = input.alpha_bar;
  const double noise_sd = std::sqrt(1.0 - abar);
  const double shift = std::sqrt(abar) * mean_;
  const double scale = noise_sd / (abar * stddev_ * stddev_ + 1.0 - abar);
  VoxelGrid out(input.channels.dims);
  const double* x = input.channels.channel(0);
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = scale * (x[i] - shift);
  require_finite(out);
  return out;
}

std::optional<double> GaussianOracleDenoiser::reverse_variance(int t, const NoiseSchedule& schedule) const {
  const auto c = schedule.lookup(t);
  const double prev = schedule.alpha_bar_or_one(t - 1);
  const double posterior = c.beta * (1.0 - prev) / (1.0 - c.alpha_bar);
  const double s2 = stddev_ * stddev_;
  const double x0_var = s2 * (1.0 - c.alpha_bar) / (c.alpha_bar * s2 + 1.0 - c.alpha_bar);
  const double coef = std::sqrt(prev) * c.beta / (1.0 - c.alpha_bar);
  return posterior + coef * coef * x0_var;
}

// ---------------------------------------------------------------------------

std::vector<std::span<double>> DenoiserGrads::spans() {
  std::vector<std::span<double>> out;
  for (auto& l : layers) {
    out.emplace_back(l.weights);
    out.emplace_back(l.bias);
  }
  return out;
}

std::vector<std::span<const double>> DenoiserGrads::spans() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers) {
    out.emplace_back(l.weights);
    out.emplace_back(l.bias);
  }
  return out;
}

ConvDenoiser::ConvDenoiser(int hidden)
    : layers_{Conv3dLayer(kDenoiserInputChannels, hidden), Conv3dLayer(hidden, hidden), Conv3dLayer(hidden, 1)} {
  if (hidden < 1) throw Error(Errc::InvalidArgument, "hidden width must be positive");
}

ConvDenoiser::ConvDenoiser(int hidden, std::uint64_t seed) : ConvDenoiser(hidden) {
  Rng rng(seed);
  for (auto& layer : layers_) {
    const double sd = std::sqrt(2.0 / (27.0 * layer.in_channels));
    for (double& w : layer.weights) w = sd * rng.normal();
  }
}

std::vector<std::span<double>> ConvDenoiser::parameters() {
  std::vector<std::span<double>> out;
  for (auto& l : layers_) {
    out.emplace_back(l.weights);
    out.emplace_back(l.bias);
  }
  return out;
}

std::size_t ConvDenoiser::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

bool ConvDenoiser::parameters_finite() const noexcept {
  for (const auto& l : layers_) {
    for (double w : l.weights) {
      if (!std::isfinite(w)) return false;
    }
    for (double b : l.bias) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

bool operator==(const ConvDenoiser& a, const ConvDenoiser& b) {
  for (std::size_t k = 0; k < a.layers_.size(); ++k) {
    const auto& la = a.layers_[k];
    const auto& lb = b.layers_[k];
    if (la.in_channels != lb.in_channels || la.out_channels != lb.out_channels || la.weights != lb.weights ||
        la.bias != lb.bias) {
      return false;
    }
  }
  return true;
}

VoxelGrid ConvDenoiser::predict(const DenoiserInput& input) const {
  Tensor4 h = conv3d_forward(layers_[0], input.channels, mode_);
  relu_inplace(h);
  h = conv3d_forward(layers_[1], h, mode_);
  relu_inplace(h);
  VoxelGrid out = grid_from_channel(conv3d_forward(layers_[2], h, mode_), 0);
  require_finite(out);
  return out;
}

double denoiser_loss(const ConvDenoiser& denoiser, const DenoiserInput& input, const VoxelGrid& epsilon_true) {
  if (epsilon_true.dims() != input.channels.dims) throw Error(Errc::DimMismatch, "target noise shape mismatch");
  const VoxelGrid pred = denoiser.predict(input);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred.values()[i] - epsilon_true.values()[i];
    sum += r * r;
  }
  return sum / static_cast<double>(pred.size());
}

LossAndGrads loss_and_grads(const ConvDenoiser& denoiser, const DenoiserInput& input, const VoxelGrid& epsilon_true) {
  if (epsilon_true.dims() != input.channels.dims) throw Error(Errc::DimMismatch, "target noise shape mismatch");
  const auto& layers = denoiser.layers();
  const KernelMode mode = denoiser.kernel_mode();

  const Tensor4 z1 = conv3d_forward(layers[0], input.channels, mode);
  Tensor4 a1 = z1;
  relu_inplace(a1);
  const Tensor4 z2 = conv3d_forward(layers[1], a1, mode);
  Tensor4 a2 = z2;
  relu_inplace(a2);
  const Tensor4 out = conv3d_forward(layers[2], a2, mode);

  const std::size_t n = out.plane();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossAndGrads result;
  Tensor4 grad_out(1, out.dims);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = out.data[i] - epsilon_true.values()[i];
    sum += r * r;
    grad_out.data[i] = 2.0 * r * inv_n;
  }
  result.loss = sum * inv_n;
  if (!std::isfinite(result.loss)) throw Error(Errc::NonFiniteOutput, "loss is not finite");

  Tensor4 g2 = conv3d_backward(layers[2], a2, grad_out, result.grads.layers[2], true, mode);
  for (std::size_t i = 0; i < g2.data.size(); ++i) {
    if (z2.data[i] <= 0.0) g2.data[i] = 0.0;
  }
  Tensor4 g1 = conv3d_backward(layers[1], a1, g2, result.grads.layers[1], true, mode);
  for (std::size_t i = 0; i < g1.data.size(); ++i) {
    if (z1.data[i] <= 0.0) g1.data[i] = 0.0;
  }
  conv3d_backward(layers[0], input.channels, g1, result.grads.layers[0], false, mode);
  return result;
}

// ---------------------------------------------------------------------------

void adam_step(AdamState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) throw Error(Errc::DimMismatch, "parameter/gradient group count differs");
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.size(), 0.0);
      state.second_moment.emplace_back(p.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) throw Error(Errc::DimMismatch, "Adam state shaped differently");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size() || state.first_moment[k].size() != params[k].size()) {
      throw Error(Errc::DimMismatch, "parameter/gradient sizes differ");
    }
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    const auto p = params[k];
    const auto g = grads[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

std::vector<LossRecord> train(ConvDenoiser& denoiser, const std::vector<Sample>& dataset,
                              const NoiseSchedule& schedule, const TrainConfig& config) {
  for (const auto& s : dataset) {
    if (!s.target) throw Error(Errc::MissingTarget, "sample " + s.id + " has no target");
  }
  std::vector<LossRecord> curve;
  if (config.epochs <= 0 || dataset.empty()) return curve;

  AdamState adam;
  adam.lr = config.lr;
  Rng rng(config.seed);
  std::vector<std::size_t> order(dataset.size());
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    for (std::size_t idx : order) {
      if (config.max_steps && step >= config.max_steps) return curve;
      const auto batch = training_batch({dataset[idx]}, schedule, rng);
      const NoisedPair& pair = batch.front();
      const DenoiserInput input = assemble_input(pair.x_t, pair.prior, pair.t, schedule);
      const LossAndGrads lg = loss_and_grads(denoiser, input, pair.epsilon);
      const auto params = denoiser.parameters();
      const auto grads = lg.grads.spans();
      adam_step(adam, params, grads);
      if (!denoiser.parameters_finite()) throw Error(Errc::NonFiniteOutput, "parameters diverged during training");
      curve.push_back({++step, pair.t, lg.loss});
    }
  }
  return curve;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[4] = {'D', 'N', 'Z', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw Error(Errc::TruncatedFile, "checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

void save_checkpoint(const ConvDenoiser& denoiser, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_u32(bytes, static_cast<std::uint32_t>(denoiser.layers().size()));
  for (const auto& l : denoiser.layers()) {
    put_u32(bytes, static_cast<std::uint32_t>(l.in_channels));
    put_u32(bytes, static_cast<std::uint32_t>(l.out_channels));
    for (double w : l.weights) put_u32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(w)));
    for (double b : l.bias) put_u32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(b)));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

ConvDenoiser load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw Error(Errc::BadMagic, "missing DNZ1 magic");
  }
  std::size_t pos = 4;
  if (get_u32(bytes, pos) != 3) throw Error(Errc::BadMagic, "checkpoint must hold 3 layers");
  std::array<Conv3dLayer, 3> layers;
  for (auto& l : layers) {
    const auto in_c = static_cast<int>(get_u32(bytes, pos));
    const auto out_c = static_cast<int>(get_u32(bytes, pos));
    if (in_c < 1 || out_c < 1 || in_c > 4096 || out_c > 4096) throw Error(Errc::DimOverflow, "bad layer width");
    l = Conv3dLayer(in_c, out_c);
    for (double& w : l.weights) w = std::bit_cast<float>(get_u32(bytes, pos));
    for (double& b : l.bias) b = std::bit_cast<float>(get_u32(bytes, pos));
  }
  const int hidden = layers[0].out_channels;
  if (layers[0].in_channels != kDenoiserInputChannels || layers[1].in_channels != hidden ||
      layers[1].out_channels != hidden || layers[2].in_channels != hidden || layers[2].out_channels != 1) {
    throw Error(Errc::DimMismatch, "checkpoint layer shapes do not form a ConvDenoiser");
  }
  ConvDenoiser net(hidden);
  net.layers() = std::move(layers);
  if (!net.parameters_finite()) throw Error(Errc::NonFiniteOutput, "checkpoint holds non-finite parameters");
  return net;
}

void write_loss_csv(const std::vector<LossRecord>& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << "step,t,loss\n";
  char buf[96];
  for (const auto& r : curve) {
    std::snprintf(buf, sizeof buf, "%llu,%d,%.9g\n", static_cast<unsigned long long>(r.step), r.t, r.loss);
    out << buf;
  }
}

}  // namespace voxdiff
