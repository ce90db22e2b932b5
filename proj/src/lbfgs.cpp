#include "dpf/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace dpf {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(std::span<const double> a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::fabs(x));
  return m;
}

struct Pair {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> x0,
                           const LbfgsOptions& opts) {
  const std::size_t n = x0.size();
  if (n == 0) throw std::invalid_argument("lbfgs: empty starting point");
  if (opts.memory < 1) throw std::invalid_argument("lbfgs: memory < 1");

  LbfgsResult res;
  res.x = std::move(x0);

  std::vector<double> grad(n), new_grad(n), direction(n), trial(n);
  double value = objective(res.x, grad);
  if (!std::isfinite(value)) {
    throw std::invalid_argument("lbfgs: objective not finite at start");
  }

  std::vector<double> best_x = res.x;
  double best_value = value;

  std::deque<Pair> pairs;
  std::vector<double> alpha_buf(static_cast<std::size_t>(opts.memory));

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    if (inf_norm(grad) <= opts.grad_tol) {
      res.converged = true;
      break;
    }

    // Two-loop recursion: direction = -H * grad.
    std::copy(grad.begin(), grad.end(), direction.begin());
    for (std::size_t i = pairs.size(); i-- > 0;) {
      const Pair& p = pairs[i];
      double a = p.rho * dot(p.s, direction);
      alpha_buf[i] = a;
      for (std::size_t j = 0; j < n; ++j) direction[j] -= a * p.y[j];
    }
    if (!pairs.empty()) {
      const Pair& last = pairs.back();
      double yy = dot(last.y, last.y);
      double gamma = yy > 0.0 ? 1.0 / (last.rho * yy) : 1.0;
      for (double& d : direction) d *= gamma;
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const Pair& p = pairs[i];
      double b = p.rho * dot(p.y, direction);
      for (std::size_t j = 0; j < n; ++j) {
        direction[j] += (alpha_buf[i] - b) * p.s[j];
      }
    }
    for (double& d : direction) d = -d;

    double dg = dot(direction, grad);
    if (!(dg < 0.0)) {
      // Not a descent direction (degenerate curvature); fall back to
      // steepest descent.
      for (std::size_t j = 0; j < n; ++j) direction[j] = -grad[j];
      dg = dot(direction, grad);
      if (!(dg < 0.0)) break;  // zero gradient up to rounding
    }

    // Weak-Wolfe bisection: shrink on an Armijo failure, expand while the
    // curvature condition fails. Guarantees s.y > 0 at the accepted point,
    // so the curvature pairs stay usable.
    double step = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double new_value = 0.0;
    double armijo_step = 0.0;  // largest step seen that only lacks curvature
    bool accepted = false;
    for (int ls = 0; ls < opts.max_line_search; ++ls) {
      for (std::size_t j = 0; j < n; ++j) {
        trial[j] = res.x[j] + step * direction[j];
      }
      new_value = objective(trial, new_grad);
      if (!std::isfinite(new_value) ||
          new_value > value + opts.armijo_c1 * step * dg) {
        hi = step;
      } else if (dot(new_grad, direction) < opts.wolfe_c2 * dg) {
        lo = step;
        armijo_step = step;
      } else {
        accepted = true;
        break;
      }
      step = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * lo;
      if (step <= 0.0) break;
    }
    if (!accepted && armijo_step > 0.0) {
      // Curvature never held within the budget; take the decrease anyway.
      for (std::size_t j = 0; j < n; ++j) {
        trial[j] = res.x[j] + armijo_step * direction[j];
      }
      new_value = objective(trial, new_grad);
      accepted = true;
    }
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }

    Pair p;
    p.s.resize(n);
    p.y.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      p.s[j] = trial[j] - res.x[j];
      p.y[j] = new_grad[j] - grad[j];
    }
    double sy = dot(p.s, p.y);
    if (sy > 1e-12 * std::max(1.0, dot(p.s, p.s))) {
      p.rho = 1.0 / sy;
      if (static_cast<int>(pairs.size()) == opts.memory) pairs.pop_front();
      pairs.push_back(std::move(p));
    }

    res.x.swap(trial);
    grad.swap(new_grad);
    value = new_value;
    res.iterations = iter + 1;

    if (value < best_value) {
      best_value = value;
      best_x = res.x;
    }
  }

  if (best_value < value) {
    res.x = std::move(best_x);
    value = best_value;
  }
  res.value = value;
  return res;
}

}  // namespace dpf
