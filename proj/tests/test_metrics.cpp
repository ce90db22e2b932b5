#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "dpf/metrics.hpp"
#include "oracles.hpp"

using namespace dpf;

TEST_CASE("recall counts hits inside the cutoff") {
  CHECK(recall_at({{3, 80}}, 50) == doctest::Approx(0.5));
  CHECK(recall_at({{1, 2, 3}}, 50) == doctest::Approx(1.0));
  CHECK(recall_at({{51, 60}}, 50) == doctest::Approx(0.0));
  // More test items than the cutoff: denominator is the cutoff.
  UserRanks many(1);
  for (std::size_t r = 1; r <= 60; ++r) many[0].push_back(r);
  CHECK(recall_at(many, 50) == doctest::Approx(1.0));
  // Averaged over users.
  CHECK(recall_at({{3, 80}, {1}}, 50) == doctest::Approx(0.75));
}

TEST_CASE("ndcg follows the logarithmic discount") {
  CHECK(ndcg({{1}}) == doctest::Approx(1.0));
  CHECK(ndcg({{3}}) == doctest::Approx(0.5));
  CHECK(ndcg({{3}}) < ndcg({{1}}));
  CHECK(ndcg({{1, 3}}) == doctest::Approx(1.5));
  CHECK(ndcg({{1}, {3}}) == doctest::Approx(0.75));
}

TEST_CASE("mrr sums reciprocal ranks per user") {
  CHECK(mrr({{1, 4}}) == doctest::Approx(1.25));
  CHECK(mrr({{1}}) == doctest::Approx(1.0));
  CHECK(mrr({{2}, {2}}) == doctest::Approx(0.5));
}

TEST_CASE("mar sums raw ranks per user") {
  CHECK(mar({{3, 7}}) == doctest::Approx(10.0));
  CHECK(mar({{1}}) == doctest::Approx(1.0));
  CHECK(mar({{5, 9}}) > mar({{3, 7}}));
}

TEST_CASE("the combined report matches the individual metrics") {
  const UserRanks ranks = {{1, 7, 52}, {4}, {2, 2}};
  const auto m = compute_metrics(ranks, 50);
  CHECK(m.recall == doctest::Approx(recall_at(ranks, 50)));
  CHECK(m.ndcg == doctest::Approx(ndcg(ranks)));
  CHECK(m.mrr == doctest::Approx(mrr(ranks)));
  CHECK(m.mar == doctest::Approx(mar(ranks)));
}

TEST_CASE("metrics agree with brute-force rank enumeration") {
  std::mt19937_64 eng(4242);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> n_tests(1, 4);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t users = 2 + rep % 5;
    const std::size_t n_candidates = 10 + rep % 21;
    std::vector<std::vector<double>> scores(users);
    std::vector<std::vector<std::size_t>> tests(users);
    for (std::size_t n = 0; n < users; ++n) {
      scores[n].resize(n_candidates);
      for (auto& s : scores[n]) s = unif(eng);
      if (rep % 3 == 0) {
        // Inject ties to exercise the index rule.
        for (std::size_t i = 1; i < n_candidates; i += 3) {
          scores[n][i] = scores[n][i - 1];
        }
      }
      std::vector<std::size_t> pool(n_candidates);
      for (std::size_t i = 0; i < n_candidates; ++i) pool[i] = i;
      std::shuffle(pool.begin(), pool.end(), eng);
      pool.resize(n_tests(eng));
      tests[n] = pool;
    }

    // Ranks via the documented ordering: score descending, index ascending.
    UserRanks ranks(users);
    for (std::size_t n = 0; n < users; ++n) {
      std::vector<std::size_t> order(n_candidates);
      for (std::size_t i = 0; i < n_candidates; ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[n][a] != scores[n][b]) return scores[n][a] > scores[n][b];
        return a < b;
      });
      std::vector<std::size_t> position(n_candidates);
      for (std::size_t r = 0; r < n_candidates; ++r) position[order[r]] = r + 1;
      for (std::size_t item : tests[n]) ranks[n].push_back(position[item]);
    }

    const std::size_t cutoff = 5 + rep % 10;
    const auto got = compute_metrics(ranks, cutoff);
    const auto want = oracles::brute_metrics(scores, tests, cutoff);
    CHECK(got.recall == doctest::Approx(want.recall).epsilon(1e-12));
    CHECK(got.ndcg == doctest::Approx(want.ndcg).epsilon(1e-12));
    CHECK(got.mrr == doctest::Approx(want.mrr).epsilon(1e-12));
    CHECK(got.mar == doctest::Approx(want.mar).epsilon(1e-12));
  }
}

TEST_CASE("degenerate inputs are rejected") {
  CHECK_THROWS(recall_at({}, 50));           // no users
  CHECK_THROWS(recall_at({{1}, {}}, 50));    // user without test items
  CHECK_THROWS(recall_at({{0}}, 50));        // ranks are 1-based
  CHECK_THROWS(recall_at({{1}}, 0));         // zero cutoff
  CHECK_THROWS(ndcg({}));
  CHECK_THROWS(mrr({{}}));
  CHECK_THROWS(mar({{1, 0}}));
}
