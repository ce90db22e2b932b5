#pragma once

#include <cstddef>

// Arithmetic kernels behind the inference hot loops. Every kernel has a
// scalar reference implementation and an AVX2+FMA variant; the active table
// is chosen at runtime from CPU capabilities (override with select() or the
// DPF_KERNELS environment variable: "scalar" or "avx2").
//
// The AVX2 exponential flushes to zero below -708.39 instead of producing
// subnormals; everything else tracks libm within a few ulp. Equivalence
// between the two tables is enforced by tests/test_kernels.cpp.

namespace dpf::kernels {

enum class Impl {
  Auto,    // pick the best supported table
  Scalar,  // portable reference
  Avx2,    // AVX2 + FMA
};

struct Table {
  const char* name;

  // out[i] = exp(x[i])
  void (*vexp)(const double* x, double* out, std::size_t n);

  // In-place softmax with max subtraction; x must be nonempty.
  void (*softmax)(double* x, std::size_t n);

  // out[i] = mean[i] + 0.5 * exp(2 * log_sd[i])   (Gaussian log-normal shift)
  void (*shift_half_var)(const double* mean, const double* log_sd, double* out,
                         std::size_t n);

  // out[i] = exp(mean[i] + 0.5 * exp(2 * log_sd[i]) + (extra ? extra[i] : 0))
  // i.e. E[exp(g)] for g ~ N(mean + extra, sd^2).
  void (*exp_moment)(const double* mean, const double* log_sd,
                     const double* extra, double* out, std::size_t n);

  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);

  double (*dot)(const double* a, const double* b, std::size_t n);

  double (*reduce_add)(const double* x, std::size_t n);
};

const Table& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const Table& avx2_table();
#endif

bool avx2_supported();

// Active table; resolves Impl::Auto on first use.
const Table& active();

// Force a specific table. Throws std::runtime_error if unsupported.
void select(Impl impl);

inline void vexp(const double* x, double* out, std::size_t n) {
  active().vexp(x, out, n);
}
inline void softmax(double* x, std::size_t n) { active().softmax(x, n); }
inline void shift_half_var(const double* mean, const double* log_sd,
                           double* out, std::size_t n) {
  active().shift_half_var(mean, log_sd, out, n);
}
inline void exp_moment(const double* mean, const double* log_sd,
                       const double* extra, double* out, std::size_t n) {
  active().exp_moment(mean, log_sd, extra, out, n);
}
inline void axpy(double a, const double* x, double* y, std::size_t n) {
  active().axpy(a, x, y, n);
}
inline double dot(const double* a, const double* b, std::size_t n) {
  return active().dot(a, b, n);
}
inline double reduce_add(const double* x, std::size_t n) {
  return active().reduce_add(x, n);
}

}  // namespace dpf::kernels
