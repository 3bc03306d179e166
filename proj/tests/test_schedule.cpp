#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>

#include "test_support.hpp"
#include "voxdiff/schedule.hpp"

using namespace voxdiff;

TEST_CASE("two-step table") {
  const NoiseSchedule s = linear_schedule(2, 0.1, 0.2);
  CHECK(s.alpha(1) == doctest::Approx(0.9));
  CHECK(s.alpha(2) == doctest::Approx(0.8));
  CHECK(s.alpha_bar(1) == doctest::Approx(0.9));
  CHECK(s.alpha_bar(2) == doctest::Approx(0.72));
  CHECK(s.lookup(2).alpha_bar == doctest::Approx(0.72));
}

TEST_CASE("single step posterior variance vanishes") {
  CHECK(linear_schedule(1, 0.5, 0.5, VarianceMode::Posterior).sigma(1) == 0.0);
  CHECK(linear_schedule(1, 0.5, 0.5, VarianceMode::Beta).sigma(1) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("long product against an extended-precision oracle") {
  const NoiseSchedule s = linear_schedule(1000, 1e-4, 0.02);
  long double prod = 1.0L;
  for (int t = 1; t <= 1000; ++t) {
    const long double beta = 1e-4L + (0.02L - 1e-4L) * static_cast<long double>(t - 1) / 999.0L;
    prod *= 1.0L - beta;
  }
  CHECK(std::abs(s.alpha_bar(1000) - static_cast<double>(prod)) / static_cast<double>(prod) < 1e-12);
}

TEST_CASE("range and step errors") {
  auto code_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::InvalidArgument;
  };
  CHECK(code_of([] { linear_schedule(0); }) == Errc::BadRange);
  CHECK(code_of([] { linear_schedule(10, 0.0, 0.02); }) == Errc::BadRange);
  CHECK(code_of([] { linear_schedule(10, 0.03, 0.02); }) == Errc::BadRange);
  CHECK(code_of([] { linear_schedule(10, 1e-4, 1.0); }) == Errc::BadRange);
  const NoiseSchedule s = linear_schedule(10);
  CHECK(code_of([&] { s.lookup(0); }) == Errc::StepOutOfRange);
  CHECK(code_of([&] { s.lookup(11); }) == Errc::StepOutOfRange);
}

TEST_CASE("schedule invariants hold for assorted schedules") {
  for (int T : {1, 2, 10, 50, 1000}) {
    for (auto [b0, b1] : {std::pair{1e-4, 0.02}, std::pair{0.01, 0.3}, std::pair{0.2, 0.2}}) {
      for (VarianceMode mode : {VarianceMode::Posterior, VarianceMode::Beta}) {
        const NoiseSchedule s = linear_schedule(T, b0, b1, mode);
        double prev_abar = 1.0;
        for (int t = 1; t <= T; ++t) {
          const auto c = s.lookup(t);
          CHECK(c.beta > 0.0);
          CHECK(c.beta < 1.0);
          if (t > 1) CHECK(c.beta >= s.beta(t - 1));
          CHECK(c.alpha == doctest::Approx(1.0 - c.beta));
          CHECK(c.alpha_bar == doctest::Approx(c.alpha * prev_abar).epsilon(1e-14));
          CHECK(c.alpha_bar < prev_abar);
          // The coefficient squares of the closed form add to one.
          CHECK(std::sqrt(c.alpha_bar) * std::sqrt(c.alpha_bar) + (1.0 - c.alpha_bar) == doctest::Approx(1.0));
          const double expected_var =
              mode == VarianceMode::Beta ? c.beta : c.beta * (1.0 - prev_abar) / (1.0 - c.alpha_bar);
          CHECK(c.sigma * c.sigma == doctest::Approx(expected_var).epsilon(1e-12));
          CHECK(c.sigma >= 0.0);
          prev_abar = c.alpha_bar;
        }
        CHECK(s.alpha_bar_or_one(0) == 1.0);
      }
    }
  }
}

TEST_CASE("posterior sigma never exceeds beta sigma") {
  const NoiseSchedule p = linear_schedule(1000, 1e-4, 0.02, VarianceMode::Posterior);
  const NoiseSchedule b = linear_schedule(1000, 1e-4, 0.02, VarianceMode::Beta);
  for (int t = 1; t <= 1000; ++t) CHECK(p.sigma(t) <= b.sigma(t));
}

TEST_CASE("schedule dump") {
  testing::TempDir dir("sched");
  write_schedule_csv(linear_schedule(3, 0.1, 0.3), dir / "s.csv");
  std::ifstream in(dir / "s.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,beta,alpha,alpha_bar,sigma");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
}
