#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dpf/model.hpp"
#include "dpf/variational.hpp"

// Expected click rate under the posterior,
//   score(n, m, t) = sum_k E[exp(u + ubar)] * E[exp(v + vbar)],
// each expectation a log-normal mean, exp(mu + var / 2). Scoring one step
// past the training window carries the last means forward; Extrapolate also
// adds one transition's variance to the dynamic factors, LastEpoch reuses
// the final step's posterior unchanged.

namespace dpf {

enum class ExtrapolationMode { Extrapolate, LastEpoch };

double predict_score(const VariationalState& vs, const Hyperparams& hp,
                     std::size_t user, std::size_t item, std::size_t t,
                     ExtrapolationMode mode = ExtrapolationMode::Extrapolate);

struct ScoredItem {
  std::size_t item;
  double score;
};

// Candidates sorted by descending score; equal scores keep ascending item
// index. Throws std::invalid_argument on an empty candidate list.
std::vector<ScoredItem> rank_items(
    const VariationalState& vs, const Hyperparams& hp, std::size_t user,
    std::size_t t, std::span<const std::size_t> candidates,
    ExtrapolationMode mode = ExtrapolationMode::Extrapolate);

}  // namespace dpf
