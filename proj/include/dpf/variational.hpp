#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dpf/model.hpp"
#include "dpf/tensor.hpp"

// Mean-field Gaussian posterior over every latent coordinate, the per-entry
// auxiliary weights that split each count across factors, and the cached
// column sums of expected rates. Dynamic blocks are laid out time-major,
// ((t * E) + e) * K + k, matching LatentState.

namespace dpf {

struct VariationalState {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t n_steps = 0;
  std::size_t k = 0;

  std::vector<double> u_mean, u_log_sd;        // T * N * K
  std::vector<double> v_mean, v_log_sd;        // T * M * K
  std::vector<double> ubar_mean, ubar_log_sd;  // N * K
  std::vector<double> vbar_mean, vbar_log_sd;  // M * K

  std::size_t u_off(std::size_t n, std::size_t t) const {
    return (t * n_users + n) * k;
  }
  std::size_t v_off(std::size_t m, std::size_t t) const {
    return (t * n_items + m) * k;
  }

  std::span<double> u_mean_at(std::size_t n, std::size_t t) {
    return {u_mean.data() + u_off(n, t), k};
  }
  std::span<const double> u_mean_at(std::size_t n, std::size_t t) const {
    return {u_mean.data() + u_off(n, t), k};
  }
  std::span<double> v_mean_at(std::size_t m, std::size_t t) {
    return {v_mean.data() + v_off(m, t), k};
  }
  std::span<const double> v_mean_at(std::size_t m, std::size_t t) const {
    return {v_mean.data() + v_off(m, t), k};
  }

  // Posterior means only, dropped into point-estimate form.
  LatentState mean_state() const;
};

// Means are drawn uniformly from [-init_scale, init_scale], one draw per
// (entity, factor); a dynamic factor starts flat, sharing its draw across
// all steps. Every log-stddev starts at log(init_stddev).
VariationalState init_variational(const InteractionTensor& tensor,
                                  const Hyperparams& hp, double init_scale,
                                  double init_stddev, std::uint64_t seed);

// Softmax weights over factors for each nonzero entry, stored per step in
// the entry order of the step's slice.
struct AuxWeights {
  std::size_t k = 0;
  std::vector<std::vector<double>> step;  // step[t]: nnz(t) * K

  std::span<double> at(std::size_t t, std::size_t entry) {
    return {step[t].data() + entry * k, k};
  }
  std::span<const double> at(std::size_t t, std::size_t entry) const {
    return {step[t].data() + entry * k, k};
  }
};

AuxWeights make_aux_weights(const InteractionTensor& tensor, std::size_t k);

// phi_k ∝ exp(E[u] + E[ubar] + E[v] + E[vbar]); exact maximizer of the
// bound at fixed Gaussian parameters.
void update_phi_step(const InteractionTensor& tensor,
                     const VariationalState& vs, std::size_t t,
                     AuxWeights& phi, unsigned threads);
void update_phi(const InteractionTensor& tensor, const VariationalState& vs,
                AuxWeights& phi, unsigned threads);

// a[t*K+k] = sum_n exp(E[u] + Var[u]/2 + E[ubar] + Var[ubar]/2), and b the
// item analogue, so sum_k a*b is the expected total rate of step t.
struct ExpectedRateSums {
  std::size_t n_steps = 0;
  std::size_t k = 0;
  std::vector<double> a;  // T * K
  std::vector<double> b;  // T * K

  std::span<double> a_at(std::size_t t) { return {a.data() + t * k, k}; }
  std::span<const double> a_at(std::size_t t) const {
    return {a.data() + t * k, k};
  }
  std::span<double> b_at(std::size_t t) { return {b.data() + t * k, k}; }
  std::span<const double> b_at(std::size_t t) const {
    return {b.data() + t * k, k};
  }
};

ExpectedRateSums make_rate_sums(const VariationalState& vs, unsigned threads);
// user_shift / item_shift: per-entity K-vectors E[bar] + Var[bar]/2, the
// global factor's contribution to the log moment (N*K resp. M*K).
void refresh_user_sums(const VariationalState& vs, const double* user_shift,
                       std::size_t t, ExpectedRateSums& sums,
                       unsigned threads);
void refresh_item_sums(const VariationalState& vs, const double* item_shift,
                       std::size_t t, ExpectedRateSums& sums,
                       unsigned threads);

// Evidence lower bound for the current posterior and auxiliary weights.
// Throws std::runtime_error if any contribution is non-finite.
double elbo(const InteractionTensor& tensor, const Hyperparams& hp,
            const VariationalState& vs, const AuxWeights& phi,
            unsigned threads);
double elbo_with_sums(const InteractionTensor& tensor, const Hyperparams& hp,
                      const VariationalState& vs, const AuxWeights& phi,
                      const ExpectedRateSums& sums, unsigned threads);

}  // namespace dpf
