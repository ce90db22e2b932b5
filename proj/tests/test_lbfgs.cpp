#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "dpf/lbfgs.hpp"

using dpf::LbfgsOptions;
using dpf::lbfgs_minimize;

TEST_CASE("quadratic bowl converges to the center") {
  // f(x) = sum_i w_i (x_i - c_i)^2 with condition number 100.
  const std::vector<double> w = {1.0, 3.0, 10.0, 100.0};
  const std::vector<double> c = {-1.0, 0.5, 2.0, -3.0};
  auto objective = [&](std::span<const double> x, std::span<double> g) {
    double f = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - c[i];
      f += w[i] * d * d;
      g[i] = 2.0 * w[i] * d;
    }
    return f;
  };
  LbfgsOptions opts;
  opts.max_iters = 100;
  opts.grad_tol = 1e-12;
  const auto res = lbfgs_minimize(objective, {0.0, 0.0, 0.0, 0.0}, opts);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(res.x[i] == doctest::Approx(c[i]).epsilon(1e-8));
  }
  CHECK(res.value < 1e-14);
}

TEST_CASE("rosenbrock reaches the valley minimum") {
  auto objective = [](std::span<const double> x, std::span<double> g) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  LbfgsOptions opts;
  opts.max_iters = 500;
  opts.grad_tol = 1e-10;
  const auto res = lbfgs_minimize(objective, {-1.2, 1.0}, opts);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.x[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("result is never worse than the starting point") {
  std::mt19937_64 eng(5);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> x0(6);
    for (auto& x : x0) x = unif(eng);
    // A wiggly nonconvex function.
    auto objective = [](std::span<const double> x, std::span<double> g) {
      double f = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        f += std::sin(3.0 * x[i]) + 0.1 * x[i] * x[i];
        g[i] = 3.0 * std::cos(3.0 * x[i]) + 0.2 * x[i];
      }
      return f;
    };
    std::vector<double> g0(x0.size());
    const double f0 = objective(x0, g0);
    LbfgsOptions opts;
    opts.max_iters = 3;  // deliberately starved
    const auto res = lbfgs_minimize(objective, x0, opts);
    CHECK(res.value <= f0 + 1e-15);
  }
}

TEST_CASE("non-finite trial points are rejected, not returned") {
  // Region x > 1 is poisoned; the quadratic pulls toward 2 but the line
  // search must stay in the finite region and still make progress.
  auto objective = [](std::span<const double> x, std::span<double> g) {
    if (x[0] > 1.0) {
      g[0] = 0.0;
      return std::numeric_limits<double>::infinity();
    }
    const double d = x[0] - 2.0;
    g[0] = 2.0 * d;
    return d * d;
  };
  const auto res = lbfgs_minimize(objective, {0.0}, {});
  CHECK(std::isfinite(res.value));
  CHECK(res.x[0] <= 1.0);
  CHECK(res.value < 4.0);  // improved on the start
}

TEST_CASE("invalid arguments are rejected") {
  auto objective = [](std::span<const double> x, std::span<double> g) {
    g[0] = 2.0 * x[0];
    return x[0] * x[0];
  };
  CHECK_THROWS(lbfgs_minimize(objective, {}, {}));
  auto bad = [](std::span<const double>, std::span<double> g) {
    g[0] = 0.0;
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK_THROWS(lbfgs_minimize(bad, {1.0}, {}));
}
