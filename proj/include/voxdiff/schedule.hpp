#pragma once

#include <filesystem>
#include <vector>

#include "voxdiff/error.hpp"

namespace voxdiff {

enum class VarianceMode {
  Posterior,  // sigma_t^2 = beta_t (1 - abar_{t-1}) / (1 - abar_t)
  Beta,       // sigma_t^2 = beta_t
};

struct StepCoefficients {
  double beta;
  double alpha;
  double alpha_bar;
  double sigma;
};

// Immutable noise schedule tables, indexed by step t in 1..T.
class NoiseSchedule {
 public:
  NoiseSchedule(std::vector<double> betas, VarianceMode mode);

  int steps() const noexcept { return static_cast<int>(beta_.size()); }
  VarianceMode variance_mode() const noexcept { return mode_; }

  // Throws StepOutOfRange unless 1 <= t <= T.
  StepCoefficients lookup(int t) const;

  double beta(int t) const { return lookup(t).beta; }
  double alpha(int t) const { return lookup(t).alpha; }
  double alpha_bar(int t) const { return lookup(t).alpha_bar; }
  double sigma(int t) const { return lookup(t).sigma; }

  // Cumulative product with alpha_bar(0) == 1.
  double alpha_bar_or_one(int t) const;

  const std::vector<double>& betas() const noexcept { return beta_; }
  const std::vector<double>& alphas() const noexcept { return alpha_; }
  const std::vector<double>& alpha_bars() const noexcept { return alpha_bar_; }
  const std::vector<double>& sigmas() const noexcept { return sigma_; }

 private:
  void check_step(int t) const;

  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
  std::vector<double> sigma_;
  VarianceMode mode_;
};

inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.02;

// beta linearly interpolated from beta_start (t=1) to beta_end (t=T).
NoiseSchedule linear_schedule(int steps, double beta_start = kDefaultBetaStart,
                              double beta_end = kDefaultBetaEnd,
                              VarianceMode mode = VarianceMode::Posterior);

// CSV dump with header t,beta,alpha,alpha_bar,sigma.
void write_schedule_csv(const NoiseSchedule& schedule, const std::filesystem::path& path);

}  // namespace voxdiff
