#include <algorithm>
#include <cmath>

#include "dpf/kernels.hpp"

namespace dpf::kernels {
namespace {

void vexp_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

void softmax_scalar(double* x, std::size_t n) {
  double mx = x[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - mx);
    sum += x[i];
  }
  const double inv = 1.0 / sum;
  for (std::size_t i = 0; i < n; ++i) x[i] *= inv;
}

void shift_half_var_scalar(const double* mean, const double* log_sd,
                           double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = mean[i] + 0.5 * std::exp(2.0 * log_sd[i]);
}

void exp_moment_scalar(const double* mean, const double* log_sd,
                       const double* extra, double* out, std::size_t n) {
  if (extra) {
    for (std::size_t i = 0; i < n; ++i)
      out[i] = std::exp(mean[i] + 0.5 * std::exp(2.0 * log_sd[i]) + extra[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      out[i] = std::exp(mean[i] + 0.5 * std::exp(2.0 * log_sd[i]));
  }
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double reduce_add_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

}  // namespace

const Table& scalar_table() {
  static const Table t{
      "scalar",          vexp_scalar, softmax_scalar, shift_half_var_scalar,
      exp_moment_scalar, axpy_scalar, dot_scalar,     reduce_add_scalar,
  };
  return t;
}

}  // namespace dpf::kernels
