#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpf/fit.hpp"
#include "dpf/metrics.hpp"
#include "dpf/predict.hpp"
#include "dpf/tensor.hpp"

// Rolling evaluation: for each evaluation step t, the model trains on steps
// before t and ranks each test user's held-out items at t against every
// train item the user has not already clicked (train items that reappear in
// the test step stay rankable). Two static baselines share the machinery by
// reshaping the training window to a single step: PF-all pools every prior
// step, PF-last keeps only the most recent one.

namespace dpf {

enum class ModelKind { Dpf, PfAll, PfLast };

const char* model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

// Pools all steps into one; duplicate pairs sum. Counts are re-binarized
// when the source was binary, so presence data stays presence data.
InteractionTensor collapse_steps(const InteractionTensor& src);
// Keeps only the final step, as a single-step tensor over the same entities.
InteractionTensor last_step_tensor(const InteractionTensor& src);

struct EvalConfig {
  Hyperparams hp;
  FitConfig fit;
  std::uint32_t first_step = 1;  // earliest evaluation step
  std::size_t cutoff = 50;
  ExtrapolationMode mode = ExtrapolationMode::Extrapolate;
};

struct FoldReport {
  std::uint32_t eval_step = 0;
  std::size_t n_users = 0;         // users with rankable held-out items
  std::size_t n_test_entries = 0;  // held-out items ranked
  std::size_t dropped_entries = 0; // cold test entries removed by the split
  MetricSet metrics;
};

struct EvalReport {
  ModelKind kind = ModelKind::Dpf;
  std::size_t cutoff = 50;
  std::vector<FoldReport> folds;
  std::vector<std::uint32_t> skipped_steps;  // no rankable test data
  MetricSet mean;                            // unweighted mean across folds
};

// Per-user 1-based ranks of the test items, in test entry order per user.
// score_step is usually train.n_steps (one past the training window).
UserRanks fold_ranks(const InteractionTensor& train,
                     const InteractionTensor& test,
                     const VariationalState& vs, const Hyperparams& hp,
                     std::size_t score_step, ExtrapolationMode mode,
                     unsigned threads);

EvalReport evaluate_rolling(const InteractionTensor& tensor, ModelKind kind,
                            const EvalConfig& cfg);

// One TSV with every fold row plus a mean row per model. All reports must
// share a cutoff.
void write_eval_reports_tsv(const std::vector<EvalReport>& reports,
                            const std::string& path);

}  // namespace dpf
