#include "voxdiff/conv3d.hpp"

#include <algorithm>

namespace voxdiff {

namespace {

void check_input(const Conv3dLayer& layer, const Tensor4& input) {
  if (input.channels != layer.in_channels) throw Error(Errc::DimMismatch, "conv input channel count mismatch");
  if (input.dims.depth < 2 || input.dims.height < 2 || input.dims.width < 2) {
    throw Error(Errc::DimMismatch, "reflect padding needs every dim >= 2");
  }
  if (input.data.size() != static_cast<std::size_t>(input.channels) * input.dims.count()) {
    throw Error(Errc::DimMismatch, "tensor storage inconsistent");
  }
}

void check_grad(const Conv3dLayer& layer, const Tensor4& input, const Tensor4& grad_out, Conv3dGrads& grads) {
  check_input(layer, input);
  if (grad_out.channels != layer.out_channels || grad_out.dims != input.dims) {
    throw Error(Errc::DimMismatch, "conv output gradient shape mismatch");
  }
  if (grads.weights.empty()) grads.weights.assign(layer.weights.size(), 0.0);
  if (grads.bias.empty()) grads.bias.assign(layer.bias.size(), 0.0);
  if (grads.weights.size() != layer.weights.size() || grads.bias.size() != layer.bias.size()) {
    throw Error(Errc::DimMismatch, "gradient buffers shaped unlike the layer");
  }
}

}  // namespace

namespace kernels {
namespace serial {

Tensor4 conv3d_forward(const Conv3dLayer& layer, const Tensor4& input) {
  check_input(layer, input);
  const Dims3 d = input.dims;
  Tensor4 out(layer.out_channels, d);
  for (int o = 0; o < layer.out_channels; ++o) {
    double* dst = out.channel(o);
    for (int z = 0; z < d.depth; ++z) {
      for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x) {
          double acc = layer.bias[o];
          for (int i = 0; i < layer.in_channels; ++i) {
            const double* src = input.channel(i);
            for (int kz = 0; kz < 3; ++kz) {
              const int zz = reflect_index(z + kz - 1, d.depth);
              for (int ky = 0; ky < 3; ++ky) {
                const int yy = reflect_index(y + ky - 1, d.height);
                for (int kx = 0; kx < 3; ++kx) {
                  const int xx = reflect_index(x + kx - 1, d.width);
                  acc += layer.weights[layer.weight_index(o, i, kz, ky, kx)] *
                         src[(static_cast<std::size_t>(zz) * d.height + yy) * d.width + xx];
                }
              }
            }
          }
          dst[(static_cast<std::size_t>(z) * d.height + y) * d.width + x] = acc;
        }
      }
    }
  }
  return out;
}

Tensor4 conv3d_backward(const Conv3dLayer& layer, const Tensor4& input, const Tensor4& grad_out,
                        Conv3dGrads& grads, bool need_input_grad) {
  check_grad(layer, input, grad_out, grads);
  const Dims3 d = input.dims;
  Tensor4 grad_in;
  if (need_input_grad) grad_in = Tensor4(layer.in_channels, d);
  for (int o = 0; o < layer.out_channels; ++o) {
    const double* g = grad_out.channel(o);
    for (int z = 0; z < d.depth; ++z) {
      for (int y = 0; y < d.height; ++y) {
        for (int x = 0; x < d.width; ++x) {
          const double go = g[(static_cast<std::size_t>(z) * d.height + y) * d.width + x];
          grads.bias[o] += go;
          for (int i = 0; i < layer.in_channels; ++i) {
            const double* src = input.channel(i);
            for (int kz = 0; kz < 3; ++kz) {
              const int zz = reflect_index(z + kz - 1, d.depth);
              for (int ky = 0; ky < 3; ++ky) {
                const int yy = reflect_index(y + ky - 1, d.height);
                for (int kx = 0; kx < 3; ++kx) {
                  const int xx = reflect_index(x + kx - 1, d.width);
                  const std::size_t q = (static_cast<std::size_t>(zz) * d.height + yy) * d.width + xx;
                  const std::size_t w = layer.weight_index(o, i, kz, ky, kx);
                  grads.weights[w] += go * src[q];
                  if (need_input_grad) grad_in.channel(i)[q] += go * layer.weights[w];
                }
              }
            }
          }
        }
      }
    }
  }
  return grad_in;
}

}  // namespace serial

namespace parallel {

Tensor4 conv3d_forward(const Conv3dLayer& layer, const Tensor4& input) {
  check_input(layer, input);
  const Dims3 d = input.dims;
  const int H = d.height;
  const int W = d.width;
  const std::size_t slice = static_cast<std::size_t>(H) * W;
  Tensor4 out(layer.out_channels, d);

#pragma omp parallel for collapse(2) schedule(static)
  for (int o = 0; o < layer.out_channels; ++o) {
    for (int z = 0; z < d.depth; ++z) {
      double* out_slice = out.channel(o) + static_cast<std::size_t>(z) * slice;
      std::fill(out_slice, out_slice + slice, layer.bias[o]);
      for (int i = 0; i < layer.in_channels; ++i) {
        for (int kz = 0; kz < 3; ++kz) {
          const double* in_slice =
              input.channel(i) + static_cast<std::size_t>(reflect_index(z + kz - 1, d.depth)) * slice;
          for (int ky = 0; ky < 3; ++ky) {
            const double* w = &layer.weights[layer.weight_index(o, i, kz, ky, 0)];
            const double w0 = w[0], w1 = w[1], w2 = w[2];
            for (int y = 0; y < H; ++y) {
              const double* src = in_slice + static_cast<std::size_t>(reflect_index(y + ky - 1, H)) * W;
              double* dst = out_slice + static_cast<std::size_t>(y) * W;
              dst[0] += w0 * src[1] + w1 * src[0] + w2 * src[1];
#pragma omp simd
              for (int x = 1; x < W - 1; ++x) dst[x] += w0 * src[x - 1] + w1 * src[x] + w2 * src[x + 1];
              dst[W - 1] += w0 * src[W - 2] + w1 * src[W - 1] + w2 * src[W - 2];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor4 conv3d_backward(const Conv3dLayer& layer, const Tensor4& input, const Tensor4& grad_out,
                        Conv3dGrads& grads, bool need_input_grad) {
  check_grad(layer, input, grad_out, grads);
  const Dims3 d = input.dims;
  const int H = d.height;
  const int W = d.width;
  const std::size_t slice = static_cast<std::size_t>(H) * W;
  const int O = layer.out_channels;
  const int I = layer.in_channels;

  // One channel per task with a fixed summation order, so results do not depend on the thread count.
#pragma omp parallel for schedule(static)
  for (int o = 0; o < O; ++o) {
    const double* g = grad_out.channel(o);
    double s = 0.0;
    for (std::size_t p = 0; p < d.count(); ++p) s += g[p];
    grads.bias[o] += s;
  }

  // Weight gradients: one (o, i) pair per task, 27 correlations each.
#pragma omp parallel for collapse(2) schedule(static)
  for (int o = 0; o < O; ++o) {
    for (int i = 0; i < I; ++i) {
      const double* g = grad_out.channel(o);
      const double* src_c = input.channel(i);
      double acc[27] = {};
      for (int z = 0; z < d.depth; ++z) {
        const double* g_slice = g + static_cast<std::size_t>(z) * slice;
        for (int kz = 0; kz < 3; ++kz) {
          const double* in_slice = src_c + static_cast<std::size_t>(reflect_index(z + kz - 1, d.depth)) * slice;
          for (int ky = 0; ky < 3; ++ky) {
            double a0 = 0.0, a1 = 0.0, a2 = 0.0;
            for (int y = 0; y < H; ++y) {
              const double* src = in_slice + static_cast<std::size_t>(reflect_index(y + ky - 1, H)) * W;
              const double* gr = g_slice + static_cast<std::size_t>(y) * W;
              a0 += gr[0] * src[1] + gr[W - 1] * src[W - 2];
              a1 += gr[0] * src[0] + gr[W - 1] * src[W - 1];
              a2 += gr[0] * src[1] + gr[W - 1] * src[W - 2];
#pragma omp simd reduction(+ : a0, a1, a2)
              for (int x = 1; x < W - 1; ++x) {
                a0 += gr[x] * src[x - 1];
                a1 += gr[x] * src[x];
                a2 += gr[x] * src[x + 1];
              }
            }
            acc[kz * 9 + ky * 3 + 0] += a0;
            acc[kz * 9 + ky * 3 + 1] += a1;
            acc[kz * 9 + ky * 3 + 2] += a2;
          }
        }
      }
      double* gw = &grads.weights[layer.weight_index(o, i, 0, 0, 0)];
      for (int k = 0; k < 27; ++k) gw[k] += acc[k];
    }
  }

  Tensor4 grad_in;
  if (!need_input_grad) return grad_in;
  grad_in = Tensor4(I, d);

  // Input gradient: scatter through the reflected taps; each task owns one input channel.
#pragma omp parallel for schedule(static)
  for (int i = 0; i < I; ++i) {
    double* gi = grad_in.channel(i);
    for (int o = 0; o < O; ++o) {
      const double* g = grad_out.channel(o);
      for (int z = 0; z < d.depth; ++z) {
        const double* g_slice = g + static_cast<std::size_t>(z) * slice;
        for (int kz = 0; kz < 3; ++kz) {
          double* dst_slice = gi + static_cast<std::size_t>(reflect_index(z + kz - 1, d.depth)) * slice;
          for (int ky = 0; ky < 3; ++ky) {
            const double* w = &layer.weights[layer.weight_index(o, i, kz, ky, 0)];
            const double w0 = w[0], w1 = w[1], w2 = w[2];
            for (int y = 0; y < H; ++y) {
              double* dst = dst_slice + static_cast<std::size_t>(reflect_index(y + ky - 1, H)) * W;
              const double* gr = g_slice + static_cast<std::size_t>(y) * W;
              dst[1] += (w0 + w2) * gr[0];
              dst[0] += w1 * gr[0];
              dst[W - 2] += (w0 + w2) * gr[W - 1];
              dst[W - 1] += w1 * gr[W - 1];
#pragma omp simd
              for (int x = 1; x < W - 1; ++x) dst[x - 1] += w0 * gr[x];
#pragma omp simd
              for (int x = 1; x < W - 1; ++x) dst[x] += w1 * gr[x];
#pragma omp simd
              for (int x = 1; x < W - 1; ++x) dst[x + 1] += w2 * gr[x];
            }
          }
        }
      }
    }
  }
  return grad_in;
}

}  // namespace parallel
}  // namespace kernels

Tensor4 conv3d_forward(const Conv3dLayer& layer, const Tensor4& input, KernelMode mode) {
  return mode == KernelMode::Serial ? kernels::serial::conv3d_forward(layer, input)
                                    : kernels::parallel::conv3d_forward(layer, input);
}

Tensor4 conv3d_backward(const Conv3dLayer& layer, const Tensor4& input, const Tensor4& grad_out, Conv3dGrads& grads,
                        bool need_input_grad, KernelMode mode) {
  return mode == KernelMode::Serial
             ? kernels::serial::conv3d_backward(layer, input, grad_out, grads, need_input_grad)
             : kernels::parallel::conv3d_backward(layer, input, grad_out, grads, need_input_grad);
}

}  // namespace voxdiff
