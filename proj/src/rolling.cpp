#include "dpf/rolling.hpp"

#include <cinttypes>
#include <cstdio>
#include <stdexcept>

#include "dpf/parallel.hpp"

namespace dpf {

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Dpf: return "dPF";
    case ModelKind::PfAll: return "PF-all";
    case ModelKind::PfLast: return "PF-last";
  }
  throw std::invalid_argument("unknown model kind");
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "dpf" || name == "dPF") return ModelKind::Dpf;
  if (name == "pf-all" || name == "PF-all") return ModelKind::PfAll;
  if (name == "pf-last" || name == "PF-last") return ModelKind::PfLast;
  throw std::invalid_argument("unknown model '" + name +
                              "' (expected dpf, pf-all, or pf-last)");
}

InteractionTensor collapse_steps(const InteractionTensor& src) {
  const bool was_binary = src.is_binary();
  std::vector<TensorEntry> entries = src.entries();
  for (auto& e : entries) e.step = 0;
  InteractionTensor out =
      build_tensor(std::move(entries), src.n_users, src.n_items, 1,
                   src.user_ids, src.item_ids);
  return was_binary ? binarize(out) : out;
}

InteractionTensor last_step_tensor(const InteractionTensor& src) {
  std::vector<TensorEntry> entries;
  const std::uint32_t last = src.n_steps - 1;
  for (auto& e : src.entries()) {
    if (e.step == last) {
      e.step = 0;
      entries.push_back(e);
    }
  }
  return build_tensor(std::move(entries), src.n_users, src.n_items, 1,
                      src.user_ids, src.item_ids);
}

UserRanks fold_ranks(const InteractionTensor& train,
                     const InteractionTensor& test,
                     const VariationalState& vs, const Hyperparams& hp,
                     std::size_t score_step, ExtrapolationMode mode,
                     unsigned threads) {
  if (test.n_users != train.n_users || test.n_items != train.n_items) {
    throw std::invalid_argument("fold_ranks: test/train dimension mismatch");
  }
  const std::size_t N = train.n_users;
  const std::size_t M = train.n_items;
  const StepSlice& test_slice = test.steps[0];

  std::vector<std::vector<std::size_t>> per_user(N);
  parallel_for(N, threads, [&](std::size_t n) {
    const std::size_t t_begin = test_slice.row_ptr[n];
    const std::size_t t_end = test_slice.row_ptr[n + 1];
    if (t_begin == t_end) return;

    std::vector<char> excluded(M, 0);
    for (const StepSlice& slice : train.steps) {
      for (std::size_t e = slice.row_ptr[n]; e < slice.row_ptr[n + 1]; ++e) {
        excluded[slice.items[e]] = 1;
      }
    }
    for (std::size_t e = t_begin; e < t_end; ++e) {
      excluded[test_slice.items[e]] = 0;
    }
    std::vector<std::size_t> candidates;
    candidates.reserve(M);
    for (std::size_t m = 0; m < M; ++m) {
      if (!excluded[m]) candidates.push_back(m);
    }

    const auto ranked = rank_items(vs, hp, n, score_step, candidates, mode);
    std::vector<std::size_t> position(M, 0);
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      position[ranked[i].item] = i + 1;
    }
    auto& ranks = per_user[n];
    ranks.reserve(t_end - t_begin);
    for (std::size_t e = t_begin; e < t_end; ++e) {
      ranks.push_back(position[test_slice.items[e]]);
    }
  });

  UserRanks out;
  for (auto& r : per_user) {
    if (!r.empty()) out.push_back(std::move(r));
  }
  return out;
}

EvalReport evaluate_rolling(const InteractionTensor& tensor, ModelKind kind,
                            const EvalConfig& cfg) {
  if (tensor.n_steps < 2) {
    throw std::invalid_argument(
        "evaluate_rolling: need at least two steps (train and test)");
  }
  if (cfg.first_step < 1 || cfg.first_step >= tensor.n_steps) {
    throw std::invalid_argument("evaluate_rolling: first_step out of range");
  }
  if (cfg.cutoff == 0) {
    throw std::invalid_argument("evaluate_rolling: zero cutoff");
  }

  EvalReport report;
  report.kind = kind;
  report.cutoff = cfg.cutoff;

  for (std::uint32_t t = cfg.first_step; t < tensor.n_steps; ++t) {
    RollingSplit split = rolling_split(tensor, t);
    if (split.test.total_nonzeros() == 0) {
      report.skipped_steps.push_back(t);
      continue;
    }

    InteractionTensor training;
    switch (kind) {
      case ModelKind::Dpf: training = std::move(split.train); break;
      case ModelKind::PfAll: training = collapse_steps(split.train); break;
      case ModelKind::PfLast: training = last_step_tensor(split.train); break;
    }

    FitResult fitted = fit(training, cfg.hp, cfg.fit);
    const std::size_t score_step = training.n_steps;
    const ExtrapolationMode mode =
        kind == ModelKind::Dpf ? cfg.mode : ExtrapolationMode::LastEpoch;
    const UserRanks ranks =
        fold_ranks(training, split.test, fitted.state, cfg.hp, score_step,
                   mode, effective_threads(cfg.fit.threads));
    if (ranks.empty()) {
      report.skipped_steps.push_back(t);
      continue;
    }

    FoldReport fold;
    fold.eval_step = t;
    fold.n_users = ranks.size();
    for (const auto& r : ranks) fold.n_test_entries += r.size();
    fold.dropped_entries = split.dropped_entries;
    fold.metrics = compute_metrics(ranks, cfg.cutoff);
    report.folds.push_back(fold);
  }

  if (report.folds.empty()) {
    throw std::runtime_error("evaluate_rolling: no fold had rankable data");
  }
  const double count = static_cast<double>(report.folds.size());
  for (const FoldReport& f : report.folds) {
    report.mean.recall += f.metrics.recall / count;
    report.mean.ndcg += f.metrics.ndcg / count;
    report.mean.mrr += f.metrics.mrr / count;
    report.mean.mar += f.metrics.mar / count;
  }
  return report;
}

void write_eval_reports_tsv(const std::vector<EvalReport>& reports,
                            const std::string& path) {
  if (reports.empty()) {
    throw std::invalid_argument("report writer: nothing to write");
  }
  const std::size_t cutoff = reports.front().cutoff;
  for (const EvalReport& r : reports) {
    if (r.cutoff != cutoff) {
      throw std::invalid_argument("report writer: mixed cutoffs");
    }
  }
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path + " for write");

  std::fprintf(f, "# rolling ranking evaluation\n");
  std::fprintf(f,
               "# mar is the per-user summed rank averaged over users; lower "
               "is better\n");
  std::fprintf(f, "model\teval_step\tusers\ttest_entries\trecall@%zu\tndcg\tmrr\tmar\n",
               cutoff);
  for (const EvalReport& r : reports) {
    const char* name = model_kind_name(r.kind);
    std::size_t users = 0, entries = 0;
    for (const FoldReport& fold : r.folds) {
      std::fprintf(f, "%s\t%" PRIu32 "\t%zu\t%zu\t%.9g\t%.9g\t%.9g\t%.9g\n",
                   name, fold.eval_step, fold.n_users, fold.n_test_entries,
                   fold.metrics.recall, fold.metrics.ndcg, fold.metrics.mrr,
                   fold.metrics.mar);
      users += fold.n_users;
      entries += fold.n_test_entries;
    }
    std::fprintf(f, "%s\tmean\t%zu\t%zu\t%.9g\t%.9g\t%.9g\t%.9g\n", name,
                 users, entries, r.mean.recall, r.mean.ndcg, r.mean.mrr,
                 r.mean.mar);
  }
  if (std::fclose(f) != 0) throw std::runtime_error("write failed: " + path);
}

}  // namespace dpf
