#pragma once

#include <span>
#include <vector>

#include "voxdiff/voxgrid.hpp"

namespace voxdiff {

// Multi-channel volume, layout [channel][depth][height][width].
struct Tensor4 {
  int channels = 0;
  Dims3 dims{};
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(int c, Dims3 d, double fill = 0.0)
      : channels(c), dims(d), data(static_cast<std::size_t>(c) * d.count(), fill) {}

  std::size_t plane() const noexcept { return dims.count(); }
  double* channel(int c) noexcept { return data.data() + static_cast<std::size_t>(c) * plane(); }
  const double* channel(int c) const noexcept { return data.data() + static_cast<std::size_t>(c) * plane(); }
};

// 3x3x3 convolution with reflect padding (edge not repeated). Weights are laid
// out [out][in][kz][ky][kx].
struct Conv3dLayer {
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  Conv3dLayer() = default;
  Conv3dLayer(int in_c, int out_c)
      : in_channels(in_c),
        out_channels(out_c),
        weights(static_cast<std::size_t>(in_c) * out_c * 27, 0.0),
        bias(static_cast<std::size_t>(out_c), 0.0) {}

  std::size_t weight_index(int o, int i, int kz, int ky, int kx) const noexcept {
    return ((static_cast<std::size_t>(o) * in_channels + i) * 27) + kz * 9 + ky * 3 + kx;
  }
};

struct Conv3dGrads {
  std::vector<double> weights;
  std::vector<double> bias;
};

// Reflect index for padding width 1: -1 -> 1, n -> n - 2.
constexpr int reflect_index(int i, int n) noexcept {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

enum class KernelMode { Serial, Parallel };

namespace kernels {

// Straightforward loop nests; the reference the parallel kernels are tested against.
namespace serial {
Tensor4 conv3d_forward(const Conv3dLayer& layer, const Tensor4& input);
// Returns the gradient w.r.t. the input; accumulates parameter grads into `grads`.
Tensor4 conv3d_backward(const Conv3dLayer& layer, const Tensor4& input, const Tensor4& grad_out,
                        Conv3dGrads& grads, bool need_input_grad = true);
}  // namespace serial

// OpenMP kernels with contiguous inner loops over the interior of each row.
namespace parallel {
Tensor4 conv3d_forward(const Conv3dLayer& layer, const Tensor4& input);
Tensor4 conv3d_backward(const Conv3dLayer& layer, const Tensor4& input, const Tensor4& grad_out,
                        Conv3dGrads& grads, bool need_input_grad = true);
}  // namespace parallel

}  // namespace kernels

Tensor4 conv3d_forward(const Conv3dLayer& layer, const Tensor4& input, KernelMode mode = KernelMode::Parallel);
Tensor4 conv3d_backward(const Conv3dLayer& layer, const Tensor4& input, const Tensor4& grad_out, Conv3dGrads& grads,
                        bool need_input_grad = true, KernelMode mode = KernelMode::Parallel);

}  // namespace voxdiff
