#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

// Limited-memory BFGS minimizer with a weak-Wolfe bisection line search
// (sufficient decrease plus a curvature condition). Used for the per-block
// inner solves; the returned point is never worse than the starting point.

namespace dpf {

struct LbfgsOptions {
  int max_iters = 15;
  int memory = 5;
  double grad_tol = 1e-9;          // stop when ||g||_inf <= grad_tol
  double armijo_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_line_search = 40;
};

struct LbfgsResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;           // gradient tolerance reached
  bool line_search_failed = false;  // stopped early, best point returned
};

// objective(x, grad) writes the gradient and returns the value. Must be
// finite at x0; non-finite trial values are rejected by the line search.
using Objective =
    std::function<double(std::span<const double>, std::span<double>)>;

LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> x0,
                           const LbfgsOptions& opts = {});

}  // namespace dpf
