#include "dpf/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dpf/kernels.hpp"

namespace dpf {

double BlockProblem::value_grad(std::span<const double> x,
                                std::span<double> grad) const {
  const std::size_t K = k;
  const double pairs = next ? 2.0 : 1.0;
  double f = 0.0;
  for (std::size_t kk = 0; kk < K; ++kk) {
    const double mu = x[kk];
    const double rho = x[K + kk];
    const double var = std::exp(2.0 * rho);
    const double arg = mu + 0.5 * var + (shift ? shift[kk] : 0.0);
    if (arg > 700.0) {
      std::fill(grad.begin(), grad.end(), 0.0);
      return -std::numeric_limits<double>::infinity();
    }
    const double ew = std::exp(arg) * expw[kk];
    const double dp = mu - prev[kk];
    f += lin[kk] * mu - ew - 0.5 * inv_var * (dp * dp + var) + rho;
    double g_mu = lin[kk] - ew - inv_var * dp;
    if (next) {
      const double dn = next[kk] - mu;
      f -= 0.5 * inv_var * (dn * dn + var);
      g_mu += inv_var * dn;
    }
    grad[kk] = g_mu;
    grad[K + kk] = (-ew - inv_var * pairs) * var + 1.0;
  }
  return f;
}

void solve_block(const BlockProblem& prob, double* mean, double* log_sd,
                 const LbfgsOptions& opts) {
  const std::size_t K = prob.k;
  std::vector<double> x0(2 * K);
  std::copy(mean, mean + K, x0.begin());
  std::copy(log_sd, log_sd + K, x0.begin() + K);
  auto negated = [&prob](std::span<const double> x, std::span<double> grad) {
    const double f = prob.value_grad(x, grad);
    for (double& g : grad) g = -g;
    return -f;
  };
  LbfgsResult res = lbfgs_minimize(negated, std::move(x0), opts);
  std::copy(res.x.begin(), res.x.begin() + K, mean);
  std::copy(res.x.begin() + K, res.x.end(), log_sd);
}

void user_lin(const StepSlice& slice, const double* phi, std::size_t n,
              std::size_t k, double* out) {
  std::fill(out, out + k, 0.0);
  for (std::size_t e = slice.row_ptr[n]; e < slice.row_ptr[n + 1]; ++e) {
    kernels::axpy(static_cast<double>(slice.counts[e]), phi + e * k, out, k);
  }
}

void item_lin(const StepSlice& slice, const double* phi, std::size_t m,
              std::size_t k, double* out) {
  std::fill(out, out + k, 0.0);
  for (std::size_t j = slice.col_ptr[m]; j < slice.col_ptr[m + 1]; ++j) {
    const std::size_t e = slice.col_entry[j];
    kernels::axpy(static_cast<double>(slice.counts[e]), phi + e * k, out, k);
  }
}

void global_user_lin(const InteractionTensor& tensor, const AuxWeights& phi,
                     std::size_t n, std::size_t k, double* out) {
  std::fill(out, out + k, 0.0);
  std::vector<double> tmp(k);
  for (std::size_t t = 0; t < tensor.n_steps; ++t) {
    user_lin(tensor.steps[t], phi.step[t].data(), n, k, tmp.data());
    kernels::axpy(1.0, tmp.data(), out, k);
  }
}

void global_item_lin(const InteractionTensor& tensor, const AuxWeights& phi,
                     std::size_t m, std::size_t k, double* out) {
  std::fill(out, out + k, 0.0);
  std::vector<double> tmp(k);
  for (std::size_t t = 0; t < tensor.n_steps; ++t) {
    item_lin(tensor.steps[t], phi.step[t].data(), m, k, tmp.data());
    kernels::axpy(1.0, tmp.data(), out, k);
  }
}

void global_user_expw(const VariationalState& vs, const ExpectedRateSums& sums,
                      std::size_t n, double* out) {
  const std::size_t K = vs.k;
  std::fill(out, out + K, 0.0);
  std::vector<double> tmp(K);
  for (std::size_t t = 0; t < vs.n_steps; ++t) {
    kernels::exp_moment(vs.u_mean.data() + (t * vs.n_users + n) * K,
                        vs.u_log_sd.data() + (t * vs.n_users + n) * K,
                        nullptr, tmp.data(), K);
    const double* b = sums.b.data() + t * K;
    for (std::size_t kk = 0; kk < K; ++kk) out[kk] += tmp[kk] * b[kk];
  }
}

void global_item_expw(const VariationalState& vs, const ExpectedRateSums& sums,
                      std::size_t m, double* out) {
  const std::size_t K = vs.k;
  std::fill(out, out + K, 0.0);
  std::vector<double> tmp(K);
  for (std::size_t t = 0; t < vs.n_steps; ++t) {
    kernels::exp_moment(vs.v_mean.data() + (t * vs.n_items + m) * K,
                        vs.v_log_sd.data() + (t * vs.n_items + m) * K,
                        nullptr, tmp.data(), K);
    const double* a = sums.a.data() + t * K;
    for (std::size_t kk = 0; kk < K; ++kk) out[kk] += tmp[kk] * a[kk];
  }
}

}  // namespace dpf
