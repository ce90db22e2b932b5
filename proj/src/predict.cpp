#include "dpf/predict.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dpf/kernels.hpp"

namespace dpf {
namespace {

// Log moments log E[exp(x)] = mu + var / 2 for one entity's dynamic factor
// at step t (possibly one past the end) plus its global factor.
void log_moments(const double* mean, const double* log_sd, std::size_t base,
                 std::size_t k, const double* bar_mean,
                 const double* bar_log_sd, std::size_t bar_base,
                 bool extrapolate, double sigma, double* out) {
  for (std::size_t kk = 0; kk < k; ++kk) {
    double var = std::exp(2.0 * log_sd[base + kk]);
    if (extrapolate) var += sigma * sigma;
    const double bar_var = std::exp(2.0 * bar_log_sd[bar_base + kk]);
    out[kk] = mean[base + kk] + 0.5 * var + bar_mean[bar_base + kk] +
              0.5 * bar_var;
  }
}

void check_args(const VariationalState& vs, const Hyperparams& hp,
                std::size_t user, std::size_t t) {
  if (hp.k != vs.k) {
    throw std::invalid_argument("predict: hyperparameter k differs from state");
  }
  if (user >= vs.n_users) throw std::out_of_range("predict: user out of range");
  if (t > vs.n_steps) {
    throw std::out_of_range(
        "predict: step beyond one past the training window");
  }
}

}  // namespace

double predict_score(const VariationalState& vs, const Hyperparams& hp,
                     std::size_t user, std::size_t item, std::size_t t,
                     ExtrapolationMode mode) {
  check_args(vs, hp, user, t);
  if (item >= vs.n_items) {
    throw std::out_of_range("predict: item out of range");
  }
  const std::size_t K = vs.k;
  const bool past_end = t == vs.n_steps;
  const std::size_t step = past_end ? vs.n_steps - 1 : t;
  const bool extrapolate = past_end && mode == ExtrapolationMode::Extrapolate;

  std::vector<double> lu(K), lv(K), prod(K);
  log_moments(vs.u_mean.data(), vs.u_log_sd.data(),
              (step * vs.n_users + user) * K, K, vs.ubar_mean.data(),
              vs.ubar_log_sd.data(), user * K, extrapolate, hp.sigma_u,
              lu.data());
  log_moments(vs.v_mean.data(), vs.v_log_sd.data(),
              (step * vs.n_items + item) * K, K, vs.vbar_mean.data(),
              vs.vbar_log_sd.data(), item * K, extrapolate, hp.sigma_v,
              lv.data());
  for (std::size_t kk = 0; kk < K; ++kk) prod[kk] = lu[kk] + lv[kk];
  kernels::vexp(prod.data(), prod.data(), K);
  return kernels::reduce_add(prod.data(), K);
}

std::vector<ScoredItem> rank_items(const VariationalState& vs,
                                   const Hyperparams& hp, std::size_t user,
                                   std::size_t t,
                                   std::span<const std::size_t> candidates,
                                   ExtrapolationMode mode) {
  check_args(vs, hp, user, t);
  if (candidates.empty()) {
    throw std::invalid_argument("rank_items: empty candidate list");
  }
  const std::size_t K = vs.k;
  const bool past_end = t == vs.n_steps;
  const std::size_t step = past_end ? vs.n_steps - 1 : t;
  const bool extrapolate = past_end && mode == ExtrapolationMode::Extrapolate;

  std::vector<double> lu(K), lv(K), prod(K);
  log_moments(vs.u_mean.data(), vs.u_log_sd.data(),
              (step * vs.n_users + user) * K, K, vs.ubar_mean.data(),
              vs.ubar_log_sd.data(), user * K, extrapolate, hp.sigma_u,
              lu.data());

  std::vector<ScoredItem> out;
  out.reserve(candidates.size());
  for (std::size_t item : candidates) {
    if (item >= vs.n_items) {
      throw std::out_of_range("rank_items: item out of range");
    }
    log_moments(vs.v_mean.data(), vs.v_log_sd.data(),
                (step * vs.n_items + item) * K, K, vs.vbar_mean.data(),
                vs.vbar_log_sd.data(), item * K, extrapolate, hp.sigma_v,
                lv.data());
    for (std::size_t kk = 0; kk < K; ++kk) prod[kk] = lu[kk] + lv[kk];
    kernels::vexp(prod.data(), prod.data(), K);
    out.push_back({item, kernels::reduce_add(prod.data(), K)});
  }
  std::sort(out.begin(), out.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item < b.item;
  });
  return out;
}

}  // namespace dpf
