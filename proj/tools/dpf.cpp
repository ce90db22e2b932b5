#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "dpf/checkpoint.hpp"
#include "dpf/export_tables.hpp"
#include "dpf/fit.hpp"
#include "dpf/model.hpp"
#include "dpf/parallel.hpp"
#include "dpf/predict.hpp"
#include "dpf/rolling.hpp"
#include "dpf/tensor.hpp"

namespace {

using dpf::FitConfig;
using dpf::FittedModel;
using dpf::Hyperparams;
using dpf::InteractionTensor;

// Flat key=value settings file. Values found here override command-line
// flags; the keys are the long option names without the leading dashes.
class ConfigMap {
 public:
  void add_double(const std::string& key, double* target) {
    setters_[key] = [key, target](const std::string& v) {
      *target = parse_double(key, v);
    };
  }
  void add_u64(const std::string& key, std::uint64_t* target) {
    setters_[key] = [key, target](const std::string& v) {
      *target = parse_int<std::uint64_t>(key, v);
    };
  }
  void add_i64(const std::string& key, std::int64_t* target) {
    setters_[key] = [key, target](const std::string& v) {
      *target = parse_int<std::int64_t>(key, v);
    };
  }
  void add_u32(const std::string& key, std::uint32_t* target) {
    setters_[key] = [key, target](const std::string& v) {
      *target = parse_int<std::uint32_t>(key, v);
    };
  }
  void add_unsigned(const std::string& key, unsigned* target) {
    setters_[key] = [key, target](const std::string& v) {
      *target = parse_int<unsigned>(key, v);
    };
  }
  void add_int(const std::string& key, int* target) {
    setters_[key] = [key, target](const std::string& v) {
      *target = parse_int<int>(key, v);
    };
  }
  void add_size(const std::string& key, std::size_t* target) {
    setters_[key] = [key, target](const std::string& v) {
      *target = parse_int<std::size_t>(key, v);
    };
  }
  void add_string(const std::string& key, std::string* target) {
    setters_[key] = [target](const std::string& v) { *target = v; };
  }
  void add_bool(const std::string& key, bool* target) {
    setters_[key] = [key, target](const std::string& v) {
      if (v == "1" || v == "true" || v == "yes" || v == "on") {
        *target = true;
      } else if (v == "0" || v == "false" || v == "no" || v == "off") {
        *target = false;
      } else {
        throw std::invalid_argument("config: bad boolean for '" + key + "': " +
                                    v);
      }
    };
  }
  void add_string_list(const std::string& key,
                       std::vector<std::string>* target) {
    setters_[key] = [target](const std::string& v) {
      target->clear();
      std::size_t start = 0;
      while (start <= v.size()) {
        const std::size_t comma = v.find(',', start);
        const std::size_t end = comma == std::string::npos ? v.size() : comma;
        if (end > start) target->push_back(v.substr(start, end - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    };
  }

  void apply_file(const std::string& path) const {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string trimmed = trim(line);
      if (trimmed.empty() || trimmed[0] == '#') continue;
      const std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos) {
        throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                    ": expected key=value");
      }
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      auto it = setters_.find(key);
      if (it == setters_.end()) {
        throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                    ": unknown key '" + key + "'");
      }
      it->second(value);
    }
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }
  static double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const char* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end) {
      throw std::invalid_argument("config: bad number for '" + key + "': " + v);
    }
    return out;
  }
  template <typename T>
  static T parse_int(const std::string& key, const std::string& v) {
    T out{};
    const char* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end) {
      throw std::invalid_argument("config: bad integer for '" + key + "': " +
                                  v);
    }
    return out;
  }

  std::map<std::string, std::function<void(const std::string&)>> setters_;
};

struct CommonOpts {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string config;
};

void add_common(CLI::App* cmd, CommonOpts* opts, ConfigMap* cfg) {
  cmd->add_option("--seed", opts->seed, "Random seed")->capture_default_str();
  cmd->add_option("--threads", opts->threads,
                  "Worker threads (0 = all hardware threads)")
      ->capture_default_str();
  cmd->add_option("--config", opts->config,
                  "key=value file; its settings override flags");
  cfg->add_u64("seed", &opts->seed);
  cfg->add_unsigned("threads", &opts->threads);
}

struct HyperOpts {
  Hyperparams hp;
  double prior_variance = -1.0;  // <= 0 means unset

  void finish() {
    if (prior_variance > 0.0) {
      const double sigma = std::sqrt(prior_variance);
      hp.sigma_u = hp.sigma_v = hp.sigma_ubar = hp.sigma_vbar = sigma;
    }
    hp.validate();
  }
};

void add_hyper(CLI::App* cmd, HyperOpts* opts, ConfigMap* cfg) {
  Hyperparams& hp = opts->hp;
  cmd->add_option("--k", hp.k, "Latent factors")->capture_default_str();
  cmd->add_option("--mu-u", hp.mu_u, "User chain prior mean")
      ->capture_default_str();
  cmd->add_option("--sigma-u", hp.sigma_u, "User chain stddev")
      ->capture_default_str();
  cmd->add_option("--mu-v", hp.mu_v, "Item chain prior mean")
      ->capture_default_str();
  cmd->add_option("--sigma-v", hp.sigma_v, "Item chain stddev")
      ->capture_default_str();
  cmd->add_option("--mu-ubar", hp.mu_ubar, "Global user prior mean")
      ->capture_default_str();
  cmd->add_option("--sigma-ubar", hp.sigma_ubar, "Global user prior stddev")
      ->capture_default_str();
  cmd->add_option("--mu-vbar", hp.mu_vbar, "Global item prior mean")
      ->capture_default_str();
  cmd->add_option("--sigma-vbar", hp.sigma_vbar, "Global item prior stddev")
      ->capture_default_str();
  cmd->add_option("--prior-variance", opts->prior_variance,
                  "Set every prior variance at once (overrides the sigmas)");
  cfg->add_u32("k", &hp.k);
  cfg->add_double("mu-u", &hp.mu_u);
  cfg->add_double("sigma-u", &hp.sigma_u);
  cfg->add_double("mu-v", &hp.mu_v);
  cfg->add_double("sigma-v", &hp.sigma_v);
  cfg->add_double("mu-ubar", &hp.mu_ubar);
  cfg->add_double("sigma-ubar", &hp.sigma_ubar);
  cfg->add_double("mu-vbar", &hp.mu_vbar);
  cfg->add_double("sigma-vbar", &hp.sigma_vbar);
  cfg->add_double("prior-variance", &opts->prior_variance);
}

struct FitOpts {
  FitConfig config;
};

void add_fit(CLI::App* cmd, FitOpts* opts, ConfigMap* cfg) {
  FitConfig& fc = opts->config;
  cmd->add_option("--max-sweeps", fc.max_sweeps, "Sweep budget")
      ->capture_default_str();
  cmd->add_option("--tolerance", fc.tolerance,
                  "Relative bound change treated as converged")
      ->capture_default_str();
  cmd->add_option("--inner-iters", fc.inner_iters,
                  "Quasi-Newton iterations per block")
      ->capture_default_str();
  cmd->add_option("--memory", fc.lbfgs_memory, "Quasi-Newton history pairs")
      ->capture_default_str();
  cmd->add_option("--init-scale", fc.init_scale,
                  "Uniform half-width for initial means")
      ->capture_default_str();
  cmd->add_option("--init-stddev", fc.init_stddev, "Initial posterior stddev")
      ->capture_default_str();
  cfg->add_int("max-sweeps", &fc.max_sweeps);
  cfg->add_double("tolerance", &fc.tolerance);
  cfg->add_int("inner-iters", &fc.inner_iters);
  cfg->add_int("memory", &fc.lbfgs_memory);
  cfg->add_double("init-scale", &fc.init_scale);
  cfg->add_double("init-stddev", &fc.init_stddev);
}

struct InputOpts {
  std::string tensor_path;
  std::string events_path;
  std::int64_t origin = 0;
  std::int64_t granularity = 0;
  bool binarize = false;
};

void add_input(CLI::App* cmd, InputOpts* opts, ConfigMap* cfg) {
  cmd->add_option("--input", opts->tensor_path, "Interaction tensor file");
  cmd->add_option("--events", opts->events_path,
                  "TSV event log (user, item, timestamp[, count])");
  cmd->add_option("--origin", opts->origin,
                  "Epoch-seconds start of the first time step");
  cmd->add_option("--granularity", opts->granularity,
                  "Seconds per time step (required with --events)");
  cmd->add_flag("--binarize", opts->binarize,
                "Clamp every count to 1 after loading");
  cfg->add_string("input", &opts->tensor_path);
  cfg->add_string("events", &opts->events_path);
  cfg->add_i64("origin", &opts->origin);
  cfg->add_i64("granularity", &opts->granularity);
  cfg->add_bool("binarize", &opts->binarize);
}

InteractionTensor load_input(const InputOpts& opts) {
  const bool has_tensor = !opts.tensor_path.empty();
  const bool has_events = !opts.events_path.empty();
  if (has_tensor == has_events) {
    throw std::invalid_argument("give exactly one of --input or --events");
  }
  InteractionTensor tensor;
  if (has_tensor) {
    tensor = dpf::read_tensor(opts.tensor_path);
  } else {
    if (opts.granularity <= 0) {
      throw std::invalid_argument("--events needs --granularity > 0");
    }
    tensor = dpf::bucket_events(dpf::read_events_tsv(opts.events_path),
                                {opts.origin, opts.granularity});
  }
  return opts.binarize ? dpf::binarize(tensor) : tensor;
}

void maybe_apply_config(const CommonOpts& common, const ConfigMap& cfg) {
  if (!common.config.empty()) cfg.apply_file(common.config);
}

FittedModel load_model(const std::string& path) {
  if (path.empty()) throw std::invalid_argument("--model is required");
  return dpf::read_checkpoint(path);
}

int run_simulate(const CommonOpts& common, const HyperOpts& hyper,
                 std::uint32_t n_users, std::uint32_t n_items,
                 std::uint32_t n_steps, const std::string& out_path,
                 const std::string& state_path,
                 const std::string& events_path) {
  dpf::SimResult sim = dpf::simulate(hyper.hp, n_users, n_items, n_steps,
                                     common.seed,
                                     dpf::effective_threads(common.threads));
  dpf::write_tensor(sim.tensor, out_path);
  if (!state_path.empty()) dpf::write_state(sim.state, state_path);
  if (!events_path.empty()) {
    std::vector<dpf::RawEvent> events;
    for (const dpf::TensorEntry& e : sim.tensor.entries()) {
      events.push_back({sim.tensor.user_ids[e.user],
                        sim.tensor.item_ids[e.item],
                        static_cast<std::int64_t>(e.step), e.count});
    }
    dpf::write_events_tsv(events, events_path);
  }
  std::printf("simulated %u users x %u items x %u steps, %zu nonzeros\n",
              n_users, n_items, n_steps, sim.tensor.total_nonzeros());
  return 0;
}

int run_fit(const CommonOpts& common, const HyperOpts& hyper,
            const InputOpts& input, FitConfig fit_config,
            const std::string& out_path, const std::string& trace_path,
            bool quiet) {
  if (out_path.empty()) throw std::invalid_argument("--out is required");
  const InteractionTensor tensor = load_input(input);
  fit_config.seed = common.seed;
  fit_config.threads = common.threads;
  dpf::SweepCallback progress;
  if (!quiet) {
    progress = [](int sweep, double bound, const dpf::SweepTiming& timing) {
      std::fprintf(stderr, "sweep %d  elbo %.10g  (%.2fs)\n", sweep + 1,
                   bound, timing.total());
    };
  }
  dpf::FitResult result = fit(tensor, hyper.hp, fit_config, progress);

  FittedModel model;
  model.hp = hyper.hp;
  model.state = std::move(result.state);
  model.user_ids = tensor.user_ids;
  model.item_ids = tensor.item_ids;
  model.elbo_trace = result.elbo_trace;
  dpf::write_checkpoint(model, out_path);

  if (!trace_path.empty()) {
    std::FILE* f = std::fopen(trace_path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + trace_path + " for write");
    std::fprintf(f, "sweep\telbo\n");
    for (std::size_t i = 0; i < model.elbo_trace.size(); ++i) {
      std::fprintf(f, "%zu\t%.17g\n", i + 1, model.elbo_trace[i]);
    }
    if (std::fclose(f) != 0) {
      throw std::runtime_error("write failed: " + trace_path);
    }
  }
  std::printf("fit: %d sweeps, %s, elbo %.10g\n", result.sweeps,
              result.converged ? "converged" : "sweep budget exhausted",
              model.elbo_trace.back());
  return 0;
}

int run_evaluate(const CommonOpts& common, const HyperOpts& hyper,
                 const InputOpts& input, FitConfig fit_config,
                 const std::vector<std::string>& model_names,
                 std::uint32_t first_step, std::size_t cutoff,
                 bool last_epoch, const std::string& out_path) {
  if (out_path.empty()) throw std::invalid_argument("--out is required");
  if (model_names.empty()) {
    throw std::invalid_argument("--models must name at least one model");
  }
  const InteractionTensor tensor = load_input(input);
  fit_config.seed = common.seed;
  fit_config.threads = common.threads;

  dpf::EvalConfig eval;
  eval.hp = hyper.hp;
  eval.fit = fit_config;
  eval.first_step = first_step;
  eval.cutoff = cutoff;
  eval.mode = last_epoch ? dpf::ExtrapolationMode::LastEpoch
                         : dpf::ExtrapolationMode::Extrapolate;

  std::vector<dpf::EvalReport> reports;
  for (const std::string& name : model_names) {
    reports.push_back(
        evaluate_rolling(tensor, dpf::model_kind_from_name(name), eval));
  }
  dpf::write_eval_reports_tsv(reports, out_path);

  std::printf("model\trecall@%zu\tndcg\tmrr\tmar\n", cutoff);
  for (const dpf::EvalReport& r : reports) {
    std::printf("%s\t%.9g\t%.9g\t%.9g\t%.9g\n", model_kind_name(r.kind),
                r.mean.recall, r.mean.ndcg, r.mean.mrr, r.mean.mar);
  }
  return 0;
}

int run_predict(const std::string& model_path, const InputOpts& input,
                const std::string& user_id, std::int64_t step,
                std::size_t top, bool last_epoch,
                const std::string& out_path) {
  const FittedModel model = load_model(model_path);
  const dpf::VariationalState& vs = model.state;

  std::size_t user = vs.n_users;
  for (std::size_t n = 0; n < model.user_ids.size(); ++n) {
    if (model.user_ids[n] == user_id) {
      user = n;
      break;
    }
  }
  if (user == vs.n_users) {
    throw std::invalid_argument("unknown user id '" + user_id + "'");
  }
  const std::size_t t =
      step < 0 ? vs.n_steps : static_cast<std::size_t>(step);

  std::vector<char> excluded(vs.n_items, 0);
  if (!input.tensor_path.empty() || !input.events_path.empty()) {
    const InteractionTensor tensor = load_input(input);
    if (tensor.user_ids != model.user_ids ||
        tensor.item_ids != model.item_ids) {
      throw std::invalid_argument(
          "exclusion tensor does not match the checkpoint's entities");
    }
    for (const dpf::StepSlice& slice : tensor.steps) {
      for (std::size_t e = slice.row_ptr[user]; e < slice.row_ptr[user + 1];
           ++e) {
        excluded[slice.items[e]] = 1;
      }
    }
  }
  std::vector<std::size_t> candidates;
  for (std::size_t m = 0; m < vs.n_items; ++m) {
    if (!excluded[m]) candidates.push_back(m);
  }
  if (candidates.empty()) {
    throw std::runtime_error("no candidate items remain for this user");
  }

  const auto mode = last_epoch ? dpf::ExtrapolationMode::LastEpoch
                               : dpf::ExtrapolationMode::Extrapolate;
  const auto ranked = rank_items(vs, model.hp, user, t, candidates, mode);

  std::FILE* f = stdout;
  if (!out_path.empty()) {
    f = std::fopen(out_path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + out_path + " for write");
  }
  std::fprintf(f, "rank\titem\tscore\n");
  const std::size_t shown = std::min(top, ranked.size());
  for (std::size_t i = 0; i < shown; ++i) {
    std::fprintf(f, "%zu\t%s\t%.9g\n", i + 1,
                 model.item_ids[ranked[i].item].c_str(), ranked[i].score);
  }
  if (f != stdout && std::fclose(f) != 0) {
    throw std::runtime_error("write failed: " + out_path);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Dynamic Poisson factorization of time-stamped interaction data"};
  app.require_subcommand(1);

  int exit_code = 0;

  // simulate
  auto* sim_cmd = app.add_subcommand(
      "simulate", "Draw a synthetic interaction tensor from the model");
  ConfigMap sim_cfg;
  CommonOpts sim_common;
  HyperOpts sim_hyper;
  std::uint32_t sim_users = 0, sim_items = 0, sim_steps = 0;
  std::string sim_out, sim_state, sim_events;
  add_common(sim_cmd, &sim_common, &sim_cfg);
  add_hyper(sim_cmd, &sim_hyper, &sim_cfg);
  sim_cmd->add_option("--users", sim_users, "Number of users")->required();
  sim_cmd->add_option("--items", sim_items, "Number of items")->required();
  sim_cmd->add_option("--steps", sim_steps, "Number of time steps")
      ->required();
  sim_cmd->add_option("--out", sim_out, "Output tensor path")->required();
  sim_cmd->add_option("--state", sim_state, "Ground-truth factor output");
  sim_cmd->add_option("--events", sim_events, "Also write a TSV event log");
  sim_cfg.add_u32("users", &sim_users);
  sim_cfg.add_u32("items", &sim_items);
  sim_cfg.add_u32("steps", &sim_steps);
  sim_cfg.add_string("out", &sim_out);
  sim_cfg.add_string("state", &sim_state);
  sim_cfg.add_string("events", &sim_events);
  sim_cmd->callback([&] {
    maybe_apply_config(sim_common, sim_cfg);
    sim_hyper.finish();
    exit_code = run_simulate(sim_common, sim_hyper, sim_users, sim_items,
                             sim_steps, sim_out, sim_state, sim_events);
  });

  // fit
  auto* fit_cmd =
      app.add_subcommand("fit", "Fit the posterior and write a checkpoint");
  ConfigMap fit_cfg;
  CommonOpts fit_common;
  HyperOpts fit_hyper;
  InputOpts fit_input;
  FitOpts fit_opts;
  std::string fit_out, fit_trace;
  bool fit_quiet = false;
  add_common(fit_cmd, &fit_common, &fit_cfg);
  add_hyper(fit_cmd, &fit_hyper, &fit_cfg);
  add_input(fit_cmd, &fit_input, &fit_cfg);
  add_fit(fit_cmd, &fit_opts, &fit_cfg);
  fit_cmd->add_option("--out", fit_out, "Checkpoint output path")->required();
  fit_cmd->add_option("--trace", fit_trace, "Write the per-sweep bound TSV");
  fit_cmd->add_flag("--quiet", fit_quiet, "Suppress per-sweep progress");
  fit_cfg.add_string("out", &fit_out);
  fit_cfg.add_string("trace", &fit_trace);
  fit_cfg.add_bool("quiet", &fit_quiet);
  fit_cmd->callback([&] {
    maybe_apply_config(fit_common, fit_cfg);
    fit_hyper.finish();
    exit_code = run_fit(fit_common, fit_hyper, fit_input, fit_opts.config,
                        fit_out, fit_trace, fit_quiet);
  });

  // evaluate
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "Rolling train/test ranking evaluation with baselines");
  ConfigMap eval_cfg;
  CommonOpts eval_common;
  HyperOpts eval_hyper;
  InputOpts eval_input;
  FitOpts eval_fit;
  std::vector<std::string> eval_models = {"dpf", "pf-all", "pf-last"};
  std::uint32_t eval_first_step = 1;
  std::size_t eval_cutoff = 50;
  bool eval_last_epoch = false;
  std::string eval_out;
  add_common(eval_cmd, &eval_common, &eval_cfg);
  add_hyper(eval_cmd, &eval_hyper, &eval_cfg);
  add_input(eval_cmd, &eval_input, &eval_cfg);
  add_fit(eval_cmd, &eval_fit, &eval_cfg);
  eval_cmd
      ->add_option("--models", eval_models,
                   "Models to run: dpf, pf-all, pf-last")
      ->delimiter(',')
      ->capture_default_str();
  eval_cmd->add_option("--first-step", eval_first_step,
                       "Earliest evaluation step")
      ->capture_default_str();
  eval_cmd->add_option("--cutoff", eval_cutoff, "Recall cutoff")
      ->capture_default_str();
  eval_cmd->add_flag("--last-epoch", eval_last_epoch,
                     "Score with the final step's posterior unchanged");
  eval_cmd->add_option("--out", eval_out, "Report TSV path")->required();
  eval_cfg.add_string_list("models", &eval_models);
  eval_cfg.add_u32("first-step", &eval_first_step);
  eval_cfg.add_size("cutoff", &eval_cutoff);
  eval_cfg.add_bool("last-epoch", &eval_last_epoch);
  eval_cfg.add_string("out", &eval_out);
  eval_cmd->callback([&] {
    maybe_apply_config(eval_common, eval_cfg);
    eval_hyper.finish();
    exit_code = run_evaluate(eval_common, eval_hyper, eval_input,
                             eval_fit.config, eval_models, eval_first_step,
                             eval_cutoff, eval_last_epoch, eval_out);
  });

  // predict
  auto* pred_cmd = app.add_subcommand(
      "predict", "Rank items for one user from a checkpoint");
  ConfigMap pred_cfg;
  CommonOpts pred_common;
  InputOpts pred_input;
  std::string pred_model, pred_user, pred_out;
  std::int64_t pred_step = -1;
  std::size_t pred_top = 50;
  bool pred_last_epoch = false;
  add_common(pred_cmd, &pred_common, &pred_cfg);
  add_input(pred_cmd, &pred_input, &pred_cfg);
  pred_cmd->add_option("--model", pred_model, "Checkpoint path")->required();
  pred_cmd->add_option("--user", pred_user, "User id to score")->required();
  pred_cmd->add_option("--step", pred_step,
                       "Time step (default: one past the training window)");
  pred_cmd->add_option("--top", pred_top, "Rows to print")
      ->capture_default_str();
  pred_cmd->add_flag("--last-epoch", pred_last_epoch,
                     "Score with the final step's posterior unchanged");
  pred_cmd->add_option("--out", pred_out, "Output path (default stdout)");
  pred_cfg.add_string("model", &pred_model);
  pred_cfg.add_string("user", &pred_user);
  pred_cfg.add_i64("step", &pred_step);
  pred_cfg.add_size("top", &pred_top);
  pred_cfg.add_bool("last-epoch", &pred_last_epoch);
  pred_cfg.add_string("out", &pred_out);
  pred_cmd->callback([&] {
    maybe_apply_config(pred_common, pred_cfg);
    exit_code = run_predict(pred_model, pred_input, pred_user, pred_step,
                            pred_top, pred_last_epoch, pred_out);
  });

  // export-trajectories / export-global
  auto* traj_cmd = app.add_subcommand(
      "export-trajectories",
      "Per-step expression levels (dynamic + global means) as TSV");
  auto* glob_cmd = app.add_subcommand(
      "export-global", "Global factor means per entity as TSV");
  struct ExportOpts {
    ConfigMap cfg;
    CommonOpts common;
    std::string model, out;
    dpf::EntitySelection entities;
  };
  ExportOpts traj, glob;
  for (auto [cmd, opts] : {std::pair{traj_cmd, &traj}, {glob_cmd, &glob}}) {
    add_common(cmd, &opts->common, &opts->cfg);
    cmd->add_option("--model", opts->model, "Checkpoint path")->required();
    cmd->add_option("--out", opts->out, "Output TSV path")->required();
    cmd->add_option("--users", opts->entities.users,
                    "User ids to export (default: all entities)")
        ->delimiter(',');
    cmd->add_option("--items", opts->entities.items,
                    "Item ids to export (default: all entities)")
        ->delimiter(',');
    opts->cfg.add_string("model", &opts->model);
    opts->cfg.add_string("out", &opts->out);
    opts->cfg.add_string_list("users", &opts->entities.users);
    opts->cfg.add_string_list("items", &opts->entities.items);
  }
  traj_cmd->callback([&] {
    maybe_apply_config(traj.common, traj.cfg);
    export_trajectories(load_model(traj.model), traj.entities, traj.out);
  });
  glob_cmd->callback([&] {
    maybe_apply_config(glob.common, glob.cfg);
    export_global_factors(load_model(glob.model), glob.entities, glob.out);
  });

  // export-aggregate
  auto* agg_cmd = app.add_subcommand(
      "export-aggregate",
      "Mean factor activity over users per step, one column per factor");
  ConfigMap agg_cfg;
  CommonOpts agg_common;
  std::string agg_model, agg_out;
  bool agg_raw = false, agg_normalize = false;
  add_common(agg_cmd, &agg_common, &agg_cfg);
  agg_cmd->add_option("--model", agg_model, "Checkpoint path")->required();
  agg_cmd->add_option("--out", agg_out, "Output TSV path")->required();
  agg_cmd->add_flag("--raw", agg_raw,
                    "Average raw expression levels instead of E[exp(.)]");
  agg_cmd->add_flag("--normalize", agg_normalize,
                    "Rescale each step's row to sum to 1");
  agg_cfg.add_string("model", &agg_model);
  agg_cfg.add_string("out", &agg_out);
  agg_cfg.add_bool("raw", &agg_raw);
  agg_cfg.add_bool("normalize", &agg_normalize);
  agg_cmd->callback([&] {
    maybe_apply_config(agg_common, agg_cfg);
    export_aggregate_factors(load_model(agg_model), agg_out, agg_raw,
                             agg_normalize);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
