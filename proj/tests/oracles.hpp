#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "dpf/model.hpp"
#include "dpf/tensor.hpp"
#include "dpf/variational.hpp"

// Independent reference implementations the production code is checked
// against. Everything here favors obviousness over speed: dense sums,
// explicit enumeration, plain formulas transcribed once and then frozen.

namespace oracles {

// Central finite differences of a scalar function.
inline std::vector<double> fd_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double step) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + step;
    const double hi = f(x);
    x[i] = keep - step;
    const double lo = f(x);
    x[i] = keep;
    g[i] = (hi - lo) / (2.0 * step);
  }
  return g;
}

// Simpson's rule for E[exp(X)], X ~ N(mu, sigma^2).
inline double quad_exp_gauss(double mu, double sigma) {
  const std::size_t n = 20000;  // even
  const double lo = mu - 12.0 * sigma;
  const double hi = mu + 12.0 * sigma;
  const double h = (hi - lo) / static_cast<double>(n);
  auto f = [&](double x) {
    const double z = (x - mu) / sigma;
    return std::exp(x) * std::exp(-0.5 * z * z) /
           (sigma * std::sqrt(2.0 * M_PI));
  };
  double s = f(lo) + f(hi);
  for (std::size_t i = 1; i < n; ++i) {
    s += f(lo + static_cast<double>(i) * h) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return s * h / 3.0;
}

// Dense double loop over every (user, item) pair per step: the expected
// total rate under the posterior via per-coordinate log-normal moments.
inline double brute_expected_total_rate(const dpf::VariationalState& vs) {
  double total = 0.0;
  const std::size_t K = vs.k;
  for (std::size_t t = 0; t < vs.n_steps; ++t) {
    for (std::size_t n = 0; n < vs.n_users; ++n) {
      for (std::size_t m = 0; m < vs.n_items; ++m) {
        for (std::size_t kk = 0; kk < K; ++kk) {
          const std::size_t iu = (t * vs.n_users + n) * K + kk;
          const std::size_t iv = (t * vs.n_items + m) * K + kk;
          const std::size_t ib = n * K + kk;
          const std::size_t jb = m * K + kk;
          const double mu = vs.u_mean[iu] +
                            0.5 * std::exp(2.0 * vs.u_log_sd[iu]) +
                            vs.ubar_mean[ib] +
                            0.5 * std::exp(2.0 * vs.ubar_log_sd[ib]);
          const double mv = vs.v_mean[iv] +
                            0.5 * std::exp(2.0 * vs.v_log_sd[iv]) +
                            vs.vbar_mean[jb] +
                            0.5 * std::exp(2.0 * vs.vbar_log_sd[jb]);
          total += std::exp(mu + mv);
        }
      }
    }
  }
  return total;
}

struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
};

// Monte Carlo estimate of the auxiliary-weight bound: sample every latent
// coordinate from q, evaluate log p(paths) + log p(globals) + the phi-split
// observation bound - log q, and average. Converges to the analytic bound.
inline McEstimate mc_elbo(const dpf::InteractionTensor& tensor,
                          const dpf::Hyperparams& hp,
                          const dpf::VariationalState& vs,
                          const dpf::AuxWeights& phi, std::size_t samples,
                          std::uint64_t seed) {
  const std::size_t N = vs.n_users;
  const std::size_t M = vs.n_items;
  const std::size_t T = vs.n_steps;
  const std::size_t K = vs.k;
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> draw;

  auto log_normal_pdf = [](double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
  };

  std::vector<double> u(T * N * K), v(T * M * K), ub(N * K), vb(M * K);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    double logp = 0.0;

    auto sample_block = [&](std::vector<double>& out,
                            const std::vector<double>& mean,
                            const std::vector<double>& log_sd) {
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double sd = std::exp(log_sd[i]);
        out[i] = mean[i] + sd * draw(eng);
        logp -= log_normal_pdf(out[i], mean[i], sd);  // -log q
      }
    };
    sample_block(u, vs.u_mean, vs.u_log_sd);
    sample_block(v, vs.v_mean, vs.v_log_sd);
    sample_block(ub, vs.ubar_mean, vs.ubar_log_sd);
    sample_block(vb, vs.vbar_mean, vs.vbar_log_sd);

    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t kk = 0; kk < K; ++kk) {
        double prev = hp.mu_u;
        for (std::size_t t = 0; t < T; ++t) {
          const double x = u[(t * N + n) * K + kk];
          logp += log_normal_pdf(x, prev, hp.sigma_u);
          prev = x;
        }
        logp += log_normal_pdf(ub[n * K + kk], hp.mu_ubar, hp.sigma_ubar);
      }
    }
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t kk = 0; kk < K; ++kk) {
        double prev = hp.mu_v;
        for (std::size_t t = 0; t < T; ++t) {
          const double x = v[(t * M + m) * K + kk];
          logp += log_normal_pdf(x, prev, hp.sigma_v);
          prev = x;
        }
        logp += log_normal_pdf(vb[m * K + kk], hp.mu_vbar, hp.sigma_vbar);
      }
    }

    for (std::size_t t = 0; t < T; ++t) {
      const dpf::StepSlice& slice = tensor.steps[t];
      for (std::size_t e = 0; e < slice.nnz(); ++e) {
        const std::size_t n = slice.users[e];
        const std::size_t m = slice.items[e];
        const double y = static_cast<double>(slice.counts[e]);
        const double* p = phi.step[t].data() + e * K;
        double inner = 0.0;
        for (std::size_t kk = 0; kk < K; ++kk) {
          if (p[kk] > 0.0) {
            inner += p[kk] * (u[(t * N + n) * K + kk] + ub[n * K + kk] +
                              v[(t * M + m) * K + kk] + vb[m * K + kk] -
                              std::log(p[kk]));
          }
        }
        logp += y * inner - std::lgamma(y + 1.0);
      }
      for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t m = 0; m < M; ++m) {
          for (std::size_t kk = 0; kk < K; ++kk) {
            logp -= std::exp(u[(t * N + n) * K + kk] + ub[n * K + kk] +
                             v[(t * M + m) * K + kk] + vb[m * K + kk]);
          }
        }
      }
    }

    sum += logp;
    sumsq += logp * logp;
  }

  McEstimate est;
  const double count = static_cast<double>(samples);
  est.mean = sum / count;
  const double var = (sumsq - sum * sum / count) / (count - 1.0);
  est.se = std::sqrt(var / count);
  return est;
}

// Rank enumeration plus the metric formulas transcribed directly: rank of a
// test item = 1 + number of candidates that beat it (higher score, or equal
// score with a smaller index).
struct BruteMetrics {
  double recall = 0.0;
  double ndcg = 0.0;
  double mrr = 0.0;
  double mar = 0.0;
};

inline BruteMetrics brute_metrics(
    const std::vector<std::vector<double>>& scores,        // user x candidate
    const std::vector<std::vector<std::size_t>>& test_sets,  // candidate idx
    std::size_t cutoff) {
  BruteMetrics out;
  const double n_users = static_cast<double>(scores.size());
  for (std::size_t n = 0; n < scores.size(); ++n) {
    const auto& row = scores[n];
    const auto& tests = test_sets[n];
    double hits = 0.0, dcg = 0.0, rr = 0.0, ranksum = 0.0;
    for (std::size_t item : tests) {
      std::size_t rank = 1;
      for (std::size_t other = 0; other < row.size(); ++other) {
        if (other == item) continue;
        if (row[other] > row[item] ||
            (row[other] == row[item] && other < item)) {
          ++rank;
        }
      }
      if (rank <= cutoff) hits += 1.0;
      dcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
      rr += 1.0 / static_cast<double>(rank);
      ranksum += static_cast<double>(rank);
    }
    out.recall += hits / static_cast<double>(std::min(cutoff, tests.size()));
    out.ndcg += dcg;
    out.mrr += rr;
    out.mar += ranksum;
  }
  out.recall /= n_users;
  out.ndcg /= n_users;
  out.mrr /= n_users;
  out.mar /= n_users;
  return out;
}

// Sparse Poisson log-likelihood of counts under a ground-truth state,
// summed over every cell (zeros included), for recovery checks.
inline double dense_log_rate(const dpf::LatentState& st, std::size_t n,
                             std::size_t m, std::size_t t) {
  return std::log(dpf::rate(st, n, m, t));
}

}  // namespace oracles
