#include "dpf/variational.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "dpf/kernels.hpp"
#include "dpf/parallel.hpp"
#include "dpf/rng.hpp"

namespace dpf {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
// Item entities share the init stream with users; offsetting the key keeps
// the two draw sequences disjoint.
constexpr std::uint64_t kItemKeyOffset = std::uint64_t{1} << 32;

double chain_cross_entropy(const double* mean, const double* log_sd,
                           std::size_t stride, std::size_t n_steps,
                           double prior_mean, double sigma) {
  const double inv2 = 1.0 / (2.0 * sigma * sigma);
  const double norm = std::log(sigma) + 0.5 * kLog2Pi;
  double prev_mean = prior_mean;
  double prev_var = 0.0;
  double total = 0.0;
  for (std::size_t t = 0; t < n_steps; ++t) {
    const double mu = mean[t * stride];
    const double var = std::exp(2.0 * log_sd[t * stride]);
    const double d = mu - prev_mean;
    total += -(d * d + var + prev_var) * inv2 - norm;
    prev_mean = mu;
    prev_var = var;
  }
  return total;
}

double entropy_sum(const double* log_sd, std::size_t stride, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += log_sd[i * stride];
  return s + static_cast<double>(n) * 0.5 * (kLog2Pi + 1.0);
}

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    throw std::runtime_error(std::string("elbo: non-finite ") + what +
                             " term");
  }
}

}  // namespace

LatentState VariationalState::mean_state() const {
  LatentState st;
  st.n_users = n_users;
  st.n_items = n_items;
  st.n_steps = n_steps;
  st.k = k;
  st.u = u_mean;
  st.v = v_mean;
  st.ubar = ubar_mean;
  st.vbar = vbar_mean;
  return st;
}

VariationalState init_variational(const InteractionTensor& tensor,
                                  const Hyperparams& hp, double init_scale,
                                  double init_stddev, std::uint64_t seed) {
  if (init_scale < 0.0) {
    throw std::invalid_argument("init_variational: negative init scale");
  }
  if (!(init_stddev > 0.0)) {
    throw std::invalid_argument("init_variational: init stddev must be > 0");
  }
  const std::size_t N = tensor.n_users;
  const std::size_t M = tensor.n_items;
  const std::size_t T = tensor.n_steps;
  const std::size_t K = hp.k;

  VariationalState vs;
  vs.n_users = N;
  vs.n_items = M;
  vs.n_steps = T;
  vs.k = K;
  const double lsd = std::log(init_stddev);
  vs.u_mean.assign(T * N * K, 0.0);
  vs.u_log_sd.assign(T * N * K, lsd);
  vs.v_mean.assign(T * M * K, 0.0);
  vs.v_log_sd.assign(T * M * K, lsd);
  vs.ubar_mean.assign(N * K, 0.0);
  vs.ubar_log_sd.assign(N * K, lsd);
  vs.vbar_mean.assign(M * K, 0.0);
  vs.vbar_log_sd.assign(M * K, lsd);
  if (init_scale == 0.0) return vs;

  std::uniform_real_distribution<double> unif(-init_scale, init_scale);
  for (std::size_t n = 0; n < N; ++n) {
    auto eng = make_engine(seed, Stream::VariationalInit, n);
    for (std::size_t kk = 0; kk < K; ++kk) {
      const double m = unif(eng);
      for (std::size_t t = 0; t < T; ++t) vs.u_mean[(t * N + n) * K + kk] = m;
    }
    for (std::size_t kk = 0; kk < K; ++kk) {
      vs.ubar_mean[n * K + kk] = unif(eng);
    }
  }
  for (std::size_t m = 0; m < M; ++m) {
    auto eng = make_engine(seed, Stream::VariationalInit, kItemKeyOffset + m);
    for (std::size_t kk = 0; kk < K; ++kk) {
      const double mu = unif(eng);
      for (std::size_t t = 0; t < T; ++t) vs.v_mean[(t * M + m) * K + kk] = mu;
    }
    for (std::size_t kk = 0; kk < K; ++kk) {
      vs.vbar_mean[m * K + kk] = unif(eng);
    }
  }
  return vs;
}

AuxWeights make_aux_weights(const InteractionTensor& tensor, std::size_t k) {
  AuxWeights phi;
  phi.k = k;
  phi.step.resize(tensor.n_steps);
  const double uniform = 1.0 / static_cast<double>(k);
  for (std::size_t t = 0; t < tensor.n_steps; ++t) {
    phi.step[t].assign(tensor.steps[t].nnz() * k, uniform);
  }
  return phi;
}

void update_phi_step(const InteractionTensor& tensor,
                     const VariationalState& vs, std::size_t t,
                     AuxWeights& phi, unsigned threads) {
  const StepSlice& slice = tensor.steps[t];
  const std::size_t K = vs.k;
  const std::size_t N = vs.n_users;
  const std::size_t M = vs.n_items;
  double* out = phi.step[t].data();
  parallel_for(slice.nnz(), threads, [&](std::size_t e) {
    const std::size_t n = slice.users[e];
    const std::size_t m = slice.items[e];
    const double* um = vs.u_mean.data() + (t * N + n) * K;
    const double* ub = vs.ubar_mean.data() + n * K;
    const double* vm = vs.v_mean.data() + (t * M + m) * K;
    const double* vb = vs.vbar_mean.data() + m * K;
    double* row = out + e * K;
    for (std::size_t kk = 0; kk < K; ++kk) {
      row[kk] = um[kk] + ub[kk] + vm[kk] + vb[kk];
    }
    kernels::softmax(row, K);
  });
}

void update_phi(const InteractionTensor& tensor, const VariationalState& vs,
                AuxWeights& phi, unsigned threads) {
  for (std::size_t t = 0; t < tensor.n_steps; ++t) {
    update_phi_step(tensor, vs, t, phi, threads);
  }
}

void refresh_user_sums(const VariationalState& vs, const double* user_shift,
                       std::size_t t, ExpectedRateSums& sums,
                       unsigned threads) {
  const std::size_t K = vs.k;
  const std::size_t N = vs.n_users;
  double* row = sums.a.data() + t * K;
  std::fill(row, row + K, 0.0);
  parallel_reduce_vec(N, threads, K,
                      row, [&](std::size_t b, std::size_t e, double* acc) {
                        std::vector<double> tmp(K);
                        for (std::size_t n = b; n < e; ++n) {
                          kernels::exp_moment(
                              vs.u_mean.data() + (t * N + n) * K,
                              vs.u_log_sd.data() + (t * N + n) * K,
                              user_shift + n * K, tmp.data(), K);
                          for (std::size_t kk = 0; kk < K; ++kk)
                            acc[kk] += tmp[kk];
                        }
                      });
}

void refresh_item_sums(const VariationalState& vs, const double* item_shift,
                       std::size_t t, ExpectedRateSums& sums,
                       unsigned threads) {
  const std::size_t K = vs.k;
  const std::size_t M = vs.n_items;
  double* row = sums.b.data() + t * K;
  std::fill(row, row + K, 0.0);
  parallel_reduce_vec(M, threads, K,
                      row, [&](std::size_t b, std::size_t e, double* acc) {
                        std::vector<double> tmp(K);
                        for (std::size_t m = b; m < e; ++m) {
                          kernels::exp_moment(
                              vs.v_mean.data() + (t * M + m) * K,
                              vs.v_log_sd.data() + (t * M + m) * K,
                              item_shift + m * K, tmp.data(), K);
                          for (std::size_t kk = 0; kk < K; ++kk)
                            acc[kk] += tmp[kk];
                        }
                      });
}

ExpectedRateSums make_rate_sums(const VariationalState& vs, unsigned threads) {
  const std::size_t K = vs.k;
  ExpectedRateSums sums;
  sums.n_steps = vs.n_steps;
  sums.k = K;
  sums.a.assign(vs.n_steps * K, 0.0);
  sums.b.assign(vs.n_steps * K, 0.0);
  std::vector<double> user_shift(vs.n_users * K), item_shift(vs.n_items * K);
  kernels::shift_half_var(vs.ubar_mean.data(), vs.ubar_log_sd.data(),
                          user_shift.data(), user_shift.size());
  kernels::shift_half_var(vs.vbar_mean.data(), vs.vbar_log_sd.data(),
                          item_shift.data(), item_shift.size());
  for (std::size_t t = 0; t < vs.n_steps; ++t) {
    refresh_user_sums(vs, user_shift.data(), t, sums, threads);
    refresh_item_sums(vs, item_shift.data(), t, sums, threads);
  }
  return sums;
}

double elbo_with_sums(const InteractionTensor& tensor, const Hyperparams& hp,
                      const VariationalState& vs, const AuxWeights& phi,
                      const ExpectedRateSums& sums, unsigned threads) {
  const std::size_t N = vs.n_users;
  const std::size_t M = vs.n_items;
  const std::size_t T = vs.n_steps;
  const std::size_t K = vs.k;

  // Gaussian chains plus entropies, one pass per entity.
  const double user_chains = parallel_reduce_add(
      N * K, threads, [&](std::size_t b, std::size_t e) {
        double s = 0.0;
        for (std::size_t i = b; i < e; ++i) {
          s += chain_cross_entropy(vs.u_mean.data() + i,
                                   vs.u_log_sd.data() + i, N * K, T, hp.mu_u,
                                   hp.sigma_u);
          s += entropy_sum(vs.u_log_sd.data() + i, N * K, T);
        }
        return s;
      });
  require_finite(user_chains, "user chain");

  const double item_chains = parallel_reduce_add(
      M * K, threads, [&](std::size_t b, std::size_t e) {
        double s = 0.0;
        for (std::size_t i = b; i < e; ++i) {
          s += chain_cross_entropy(vs.v_mean.data() + i,
                                   vs.v_log_sd.data() + i, M * K, T, hp.mu_v,
                                   hp.sigma_v);
          s += entropy_sum(vs.v_log_sd.data() + i, M * K, T);
        }
        return s;
      });
  require_finite(item_chains, "item chain");

  auto global_term = [&](const std::vector<double>& mean,
                         const std::vector<double>& log_sd, double prior_mean,
                         double sigma) {
    const double inv2 = 1.0 / (2.0 * sigma * sigma);
    const double norm = std::log(sigma) + 0.5 * kLog2Pi;
    return parallel_reduce_add(
        mean.size(), threads, [&](std::size_t b, std::size_t e) {
          double s = 0.0;
          for (std::size_t i = b; i < e; ++i) {
            const double d = mean[i] - prior_mean;
            const double var = std::exp(2.0 * log_sd[i]);
            s += -(d * d + var) * inv2 - norm;
          }
          return s;
        }) + entropy_sum(log_sd.data(), 1, log_sd.size());
  };
  const double user_globals =
      global_term(vs.ubar_mean, vs.ubar_log_sd, hp.mu_ubar, hp.sigma_ubar);
  require_finite(user_globals, "user global");
  const double item_globals =
      global_term(vs.vbar_mean, vs.vbar_log_sd, hp.mu_vbar, hp.sigma_vbar);
  require_finite(item_globals, "item global");

  double observation = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const StepSlice& slice = tensor.steps[t];
    const double* phi_t = phi.step[t].data();
    observation += parallel_reduce_add(
        slice.nnz(), threads, [&](std::size_t b, std::size_t e) {
          double s = 0.0;
          for (std::size_t ent = b; ent < e; ++ent) {
            const std::size_t n = slice.users[ent];
            const std::size_t m = slice.items[ent];
            const double y = static_cast<double>(slice.counts[ent]);
            const double* um = vs.u_mean.data() + (t * N + n) * K;
            const double* ub = vs.ubar_mean.data() + n * K;
            const double* vm = vs.v_mean.data() + (t * M + m) * K;
            const double* vb = vs.vbar_mean.data() + m * K;
            const double* p = phi_t + ent * K;
            double inner = 0.0;
            for (std::size_t kk = 0; kk < K; ++kk) {
              if (p[kk] > 0.0) {
                inner += p[kk] * (um[kk] + ub[kk] + vm[kk] + vb[kk] -
                                  std::log(p[kk]));
              }
            }
            s += y * inner - std::lgamma(y + 1.0);
          }
          return s;
        });
  }
  require_finite(observation, "observation");

  double expected_rate = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    expected_rate += kernels::dot(sums.a.data() + t * K,
                                  sums.b.data() + t * K, K);
  }
  require_finite(expected_rate, "expected rate");

  return user_chains + item_chains + user_globals + item_globals +
         observation - expected_rate;
}

double elbo(const InteractionTensor& tensor, const Hyperparams& hp,
            const VariationalState& vs, const AuxWeights& phi,
            unsigned threads) {
  const ExpectedRateSums sums = make_rate_sums(vs, threads);
  return elbo_with_sums(tensor, hp, vs, phi, sums, threads);
}

}  // namespace dpf
