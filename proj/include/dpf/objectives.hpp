#pragma once

#include <cstddef>
#include <span>

#include "dpf/lbfgs.hpp"
#include "dpf/tensor.hpp"
#include "dpf/variational.hpp"

// Every coordinate block (a user's or item's K Gaussians at one step, or an
// entity's global factor) maximizes the same objective over x = [means,
// log-stddevs]:
//
//   f(x) = sum_k  lin_k * mu_k
//         - expw_k * exp(mu_k + var_k / 2 + shift_k)
//         - inv_var / 2 * ((mu_k - prev_k)^2 + var_k)
//         - inv_var / 2 * ((next_k - mu_k)^2 + var_k)   [if next]
//         + rho_k                                        [entropy]
//
// with var_k = exp(2 * rho_k). Everything else in the bound is constant
// while the block's coordinates move.

namespace dpf {

struct BlockProblem {
  std::size_t k = 0;
  const double* lin = nullptr;    // per-factor weighted count
  const double* expw = nullptr;   // weight on the exponential moment
  const double* shift = nullptr;  // extra log-moment offset, may be null
  const double* prev = nullptr;   // previous-step or prior means
  const double* next = nullptr;   // next-step means, null for the last block
  double inv_var = 1.0;

  // Returns f(x) and writes its gradient; -inf when the exponential would
  // overflow, which the line search treats as a rejected step.
  double value_grad(std::span<const double> x, std::span<double> grad) const;
};

// Maximizes the block objective starting from (mean, log_sd), writing the
// optimum back in place. The result is never worse than the start.
void solve_block(const BlockProblem& prob, double* mean, double* log_sd,
                 const LbfgsOptions& opts);

// lin_k = sum over the entity's nonzeros in the slice of y * phi_k.
void user_lin(const StepSlice& slice, const double* phi, std::size_t n,
              std::size_t k, double* out);
void item_lin(const StepSlice& slice, const double* phi, std::size_t m,
              std::size_t k, double* out);

// Global-block coefficients. lin aggregates y * phi over every step; expw
// folds the entity's dynamic moments into the matching rate-sum rows.
void global_user_lin(const InteractionTensor& tensor, const AuxWeights& phi,
                     std::size_t n, std::size_t k, double* out);
void global_item_lin(const InteractionTensor& tensor, const AuxWeights& phi,
                     std::size_t m, std::size_t k, double* out);
void global_user_expw(const VariationalState& vs, const ExpectedRateSums& sums,
                      std::size_t n, double* out);
void global_item_expw(const VariationalState& vs, const ExpectedRateSums& sums,
                      std::size_t m, double* out);

}  // namespace dpf
