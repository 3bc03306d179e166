// Times the serial and OpenMP conv kernels and one full denoiser step.
// Usage: bench_kernels [grid side] [repeats]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

#include "voxdiff/conv3d.hpp"
#include "voxdiff/denoise.hpp"
#include "voxdiff/rng.hpp"

using namespace voxdiff;

namespace {

double time_ms(int repeats, const std::function<void()>& fn) {
  fn();  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / repeats;
}

}  // namespace

int main(int argc, char** argv) {
  const int n = argc > 1 ? std::atoi(argv[1]) : 32;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 5;
  if (n < 2 || repeats < 1) {
    std::fprintf(stderr, "usage: bench_kernels [grid side >= 2] [repeats >= 1]\n");
    return 2;
  }
  Rng rng(1);
  const Dims3 d{n, n, n};
  Conv3dLayer layer(16, 16);
  for (double& w : layer.weights) w = 0.1 * rng.normal();
  Tensor4 x(16, d);
  for (double& v : x.data) v = rng.normal();
  Tensor4 g(16, d);
  for (double& v : g.data) v = rng.normal();

  std::printf("grid %d^3, 16 -> 16 channels, %d threads, %d repeats\n", n, omp_get_max_threads(), repeats);
  for (KernelMode mode : {KernelMode::Serial, KernelMode::Parallel}) {
    const char* name = mode == KernelMode::Serial ? "serial" : "parallel";
    const double fwd = time_ms(repeats, [&] { conv3d_forward(layer, x, mode); });
    const double bwd = time_ms(repeats, [&] {
      Conv3dGrads grads;
      conv3d_backward(layer, x, g, grads, true, mode);
    });
    std::printf("%-8s forward %9.2f ms  backward %9.2f ms\n", name, fwd, bwd);
  }

  ConvDenoiser net(16, 2);
  const NoiseSchedule s = linear_schedule(1000);
  DenoiserInput in;
  in.channels = Tensor4(kDenoiserInputChannels, d);
  for (double& v : in.channels.data) v = rng.normal();
  in.t = 500;
  in.alpha_bar = s.alpha_bar(500);
  VoxelGrid eps(d);
  for (double& v : eps.values()) v = rng.normal();
  for (KernelMode mode : {KernelMode::Serial, KernelMode::Parallel}) {
    net.set_kernel_mode(mode);
    const double pred = time_ms(repeats, [&] { net.predict(in); });
    const double step = time_ms(repeats, [&] { loss_and_grads(net, in, eps); });
    std::printf("%-8s denoiser predict %9.2f ms  loss+grads %9.2f ms\n", mode == KernelMode::Serial ? "serial" : "parallel",
                pred, step);
  }
  return 0;
}
