#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dpf/tensor.hpp"

// Generative model: per-entity global factors plus Gaussian random-walk
// correction chains in log space, Poisson emission on the summed
// exponentials. Includes a simulator for synthetic benchmarks.

namespace dpf {

struct Hyperparams {
  std::uint32_t k = 20;

  double mu_u = 0.0;  // prior mean, user chain at t = 1
  double mu_v = 0.0;
  double sigma_u = 3.1622776601683795;  // sqrt(10); shared by the t = 1
  double sigma_v = 3.1622776601683795;  // prior and the transition noise

  double mu_ubar = 0.0;  // global (static) factors
  double mu_vbar = 0.0;
  double sigma_ubar = 3.1622776601683795;
  double sigma_vbar = 3.1622776601683795;

  void validate() const;
};

// Ground-truth factors. Dynamic arrays are laid out ((t * E) + e) * K + k so
// one (entity, step) block is contiguous.
struct LatentState {
  std::uint32_t n_users = 0;
  std::uint32_t n_items = 0;
  std::uint32_t n_steps = 0;
  std::uint32_t k = 0;

  std::vector<double> u;     // n_steps * n_users * k
  std::vector<double> v;     // n_steps * n_items * k
  std::vector<double> ubar;  // n_users * k
  std::vector<double> vbar;  // n_items * k

  LatentState() = default;
  LatentState(std::uint32_t n, std::uint32_t m, std::uint32_t t, std::uint32_t kk)
      : n_users(n), n_items(m), n_steps(t), k(kk),
        u(static_cast<std::size_t>(t) * n * kk, 0.0),
        v(static_cast<std::size_t>(t) * m * kk, 0.0),
        ubar(static_cast<std::size_t>(n) * kk, 0.0),
        vbar(static_cast<std::size_t>(m) * kk, 0.0) {}

  std::span<double> u_at(std::uint32_t n, std::uint32_t t) {
    return {u.data() + (static_cast<std::size_t>(t) * n_users + n) * k, k};
  }
  std::span<const double> u_at(std::uint32_t n, std::uint32_t t) const {
    return {u.data() + (static_cast<std::size_t>(t) * n_users + n) * k, k};
  }
  std::span<double> v_at(std::uint32_t m, std::uint32_t t) {
    return {v.data() + (static_cast<std::size_t>(t) * n_items + m) * k, k};
  }
  std::span<const double> v_at(std::uint32_t m, std::uint32_t t) const {
    return {v.data() + (static_cast<std::size_t>(t) * n_items + m) * k, k};
  }
  std::span<double> ubar_at(std::uint32_t n) {
    return {ubar.data() + static_cast<std::size_t>(n) * k, k};
  }
  std::span<const double> ubar_at(std::uint32_t n) const {
    return {ubar.data() + static_cast<std::size_t>(n) * k, k};
  }
  std::span<double> vbar_at(std::uint32_t m) {
    return {vbar.data() + static_cast<std::size_t>(m) * k, k};
  }
  std::span<const double> vbar_at(std::uint32_t m) const {
    return {vbar.data() + static_cast<std::size_t>(m) * k, k};
  }
};

// Poisson mean for one (user, item, step) cell:
// sum_k exp(u_{nk,t} + ubar_{nk} + v_{mk,t} + vbar_{mk}). Throws on an index
// out of range.
double rate(const LatentState& state, std::uint32_t n, std::uint32_t m,
            std::uint32_t t);

struct SimResult {
  InteractionTensor tensor;  // nonzero draws only
  LatentState state;
};

// Samples globals, chains, and Poisson observations. Deterministic given the
// seed for any thread count (per-entity random streams).
SimResult simulate(const Hyperparams& hp, std::uint32_t n_users,
                   std::uint32_t n_items, std::uint32_t n_steps,
                   std::uint64_t seed, unsigned threads = 1);

// Plain-text state file with full-precision values (ground truth for
// recovery tests).
void write_state(const LatentState& state, const std::string& path);
LatentState read_state(const std::string& path);

}  // namespace dpf
