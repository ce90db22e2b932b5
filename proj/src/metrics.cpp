#include "dpf/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace dpf {
namespace {

void check(const UserRanks& ranks) {
  if (ranks.empty()) throw std::invalid_argument("metrics: no users");
  for (const auto& r : ranks) {
    if (r.empty()) {
      throw std::invalid_argument("metrics: user with no held-out ranks");
    }
    for (std::size_t v : r) {
      if (v == 0) throw std::invalid_argument("metrics: ranks are 1-based");
    }
  }
}

template <typename PerUser>
double mean_over_users(const UserRanks& ranks, PerUser&& per_user) {
  check(ranks);
  double total = 0.0;
  for (const auto& r : ranks) total += per_user(r);
  return total / static_cast<double>(ranks.size());
}

}  // namespace

double recall_at(const UserRanks& ranks, std::size_t cutoff) {
  if (cutoff == 0) throw std::invalid_argument("metrics: zero cutoff");
  return mean_over_users(ranks, [cutoff](const std::vector<std::size_t>& r) {
    std::size_t hits = 0;
    for (std::size_t v : r) hits += v <= cutoff ? 1 : 0;
    return static_cast<double>(hits) /
           static_cast<double>(std::min(cutoff, r.size()));
  });
}

double ndcg(const UserRanks& ranks) {
  return mean_over_users(ranks, [](const std::vector<std::size_t>& r) {
    double s = 0.0;
    for (std::size_t v : r) s += 1.0 / std::log2(static_cast<double>(v) + 1.0);
    return s;
  });
}

double mrr(const UserRanks& ranks) {
  return mean_over_users(ranks, [](const std::vector<std::size_t>& r) {
    double s = 0.0;
    for (std::size_t v : r) s += 1.0 / static_cast<double>(v);
    return s;
  });
}

double mar(const UserRanks& ranks) {
  return mean_over_users(ranks, [](const std::vector<std::size_t>& r) {
    double s = 0.0;
    for (std::size_t v : r) s += static_cast<double>(v);
    return s;
  });
}

MetricSet compute_metrics(const UserRanks& ranks, std::size_t cutoff) {
  MetricSet m;
  m.recall = recall_at(ranks, cutoff);
  m.ndcg = ndcg(ranks);
  m.mrr = mrr(ranks);
  m.mar = mar(ranks);
  return m;
}

}  // namespace dpf
