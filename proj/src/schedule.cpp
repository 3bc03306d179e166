#include "voxdiff/schedule.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

namespace voxdiff {

NoiseSchedule::NoiseSchedule(std::vector<double> betas, VarianceMode mode)
    : beta_(std::move(betas)), mode_(mode) {
  if (beta_.empty()) throw Error(Errc::BadRange, "schedule needs at least one step");
  const std::size_t n = beta_.size();
  alpha_.resize(n);
  alpha_bar_.resize(n);
  sigma_.resize(n);
  double running = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double b = beta_[i];
    if (!(b > 0.0 && b < 1.0)) throw Error(Errc::BadRange, "beta must lie in (0, 1)");
    const double prev = running;
    alpha_[i] = 1.0 - b;
    running *= alpha_[i];
    alpha_bar_[i] = running;
    const double var = mode == VarianceMode::Posterior ? b * (1.0 - prev) / (1.0 - running) : b;
    sigma_[i] = std::sqrt(var);
  }
}

void NoiseSchedule::check_step(int t) const {
  if (t < 1 || t > steps()) {
    throw Error(Errc::StepOutOfRange, "step " + std::to_string(t) + " outside 1.." + std::to_string(steps()));
  }
}

StepCoefficients NoiseSchedule::lookup(int t) const {
  check_step(t);
  const auto i = static_cast<std::size_t>(t - 1);
  return {beta_[i], alpha_[i], alpha_bar_[i], sigma_[i]};
}

double NoiseSchedule::alpha_bar_or_one(int t) const {
  if (t == 0) return 1.0;
  return alpha_bar(t);
}

NoiseSchedule linear_schedule(int steps, double beta_start, double beta_end, VarianceMode mode) {
  if (steps < 1) throw Error(Errc::BadRange, "T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw Error(Errc::BadRange, "need 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    betas[static_cast<std::size_t>(i)] = beta_start + (beta_end - beta_start) * frac;
  }
  return NoiseSchedule(std::move(betas), mode);
}

void write_schedule_csv(const NoiseSchedule& schedule, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << "t,beta,alpha,alpha_bar,sigma\n";
  char buf[160];
  for (int t = 1; t <= schedule.steps(); ++t) {
    const auto c = schedule.lookup(t);
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", t, c.beta, c.alpha, c.alpha_bar, c.sigma);
    out << buf;
  }
}

}  // namespace voxdiff
