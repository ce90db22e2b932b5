#pragma once

#include <cstddef>
#include <vector>

// Rank-based retrieval metrics. Input is one vector of 1-based ranks per
// evaluated user (the positions of that user's held-out items in the ranked
// candidate list); every metric averages a per-user score over users.
//
//   recall@T : per user, hits within the top T over min(T, #held-out items)
//   ndcg     : per user, sum of 1 / log2(rank + 1) over held-out items
//   mrr      : per user, sum of reciprocal ranks
//   mar      : per user, sum of ranks (lower is better)

namespace dpf {

using UserRanks = std::vector<std::vector<std::size_t>>;

double recall_at(const UserRanks& ranks, std::size_t cutoff);
double ndcg(const UserRanks& ranks);
double mrr(const UserRanks& ranks);
double mar(const UserRanks& ranks);

struct MetricSet {
  double recall = 0.0;
  double ndcg = 0.0;
  double mrr = 0.0;
  double mar = 0.0;
};

MetricSet compute_metrics(const UserRanks& ranks, std::size_t cutoff);

}  // namespace dpf
