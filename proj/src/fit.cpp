#include "dpf/fit.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dpf/kernels.hpp"
#include "dpf/objectives.hpp"
#include "dpf/parallel.hpp"

namespace dpf {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

class PhaseTimer {
 public:
  explicit PhaseTimer(double& slot) : slot_(slot), start_(Clock::now()) {}
  ~PhaseTimer() { slot_ += seconds_since(start_); }
  PhaseTimer(const PhaseTimer&) = delete;
  PhaseTimer& operator=(const PhaseTimer&) = delete;

 private:
  double& slot_;
  Clock::time_point start_;
};

}  // namespace

FitResult fit(const InteractionTensor& tensor, const Hyperparams& hp,
              const FitConfig& cfg, const SweepCallback& on_sweep) {
  hp.validate();
  if (cfg.max_sweeps < 1) throw std::invalid_argument("fit: max_sweeps < 1");
  if (cfg.inner_iters < 1) throw std::invalid_argument("fit: inner_iters < 1");
  if (!(cfg.tolerance >= 0.0)) {
    throw std::invalid_argument("fit: tolerance must be >= 0");
  }

  const std::size_t N = tensor.n_users;
  const std::size_t M = tensor.n_items;
  const std::size_t T = tensor.n_steps;
  const std::size_t K = hp.k;
  const unsigned threads = effective_threads(cfg.threads);

  FitResult res;
  res.state = init_variational(tensor, hp, cfg.init_scale, cfg.init_stddev,
                               cfg.seed);
  res.phi = make_aux_weights(tensor, K);
  VariationalState& vs = res.state;
  update_phi(tensor, vs, res.phi, threads);

  std::vector<double> user_shift(N * K), item_shift(M * K);
  auto refresh_user_shift = [&] {
    kernels::shift_half_var(vs.ubar_mean.data(), vs.ubar_log_sd.data(),
                            user_shift.data(), user_shift.size());
  };
  auto refresh_item_shift = [&] {
    kernels::shift_half_var(vs.vbar_mean.data(), vs.vbar_log_sd.data(),
                            item_shift.data(), item_shift.size());
  };
  refresh_user_shift();
  refresh_item_shift();

  ExpectedRateSums sums;
  sums.n_steps = T;
  sums.k = K;
  sums.a.assign(T * K, 0.0);
  sums.b.assign(T * K, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    refresh_user_sums(vs, user_shift.data(), t, sums, threads);
    refresh_item_sums(vs, item_shift.data(), t, sums, threads);
  }

  LbfgsOptions solver;
  solver.max_iters = cfg.inner_iters;
  solver.memory = cfg.lbfgs_memory;

  const std::vector<double> prior_u(K, hp.mu_u);
  const std::vector<double> prior_v(K, hp.mu_v);
  const std::vector<double> prior_ubar(K, hp.mu_ubar);
  const std::vector<double> prior_vbar(K, hp.mu_vbar);
  const double inv_var_u = 1.0 / (hp.sigma_u * hp.sigma_u);
  const double inv_var_v = 1.0 / (hp.sigma_v * hp.sigma_v);
  const double inv_var_ubar = 1.0 / (hp.sigma_ubar * hp.sigma_ubar);
  const double inv_var_vbar = 1.0 / (hp.sigma_vbar * hp.sigma_vbar);

  std::vector<double> ulin(N * K), vlin(M * K);

  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    SweepTiming timing;

    for (std::size_t t = 0; t < T; ++t) {
      const StepSlice& slice = tensor.steps[t];
      const double* phi_t = res.phi.step[t].data();

      {
        PhaseTimer timer(timing.observation);
        parallel_for(N, threads, [&](std::size_t n) {
          user_lin(slice, phi_t, n, K, ulin.data() + n * K);
        });
      }
      {
        PhaseTimer timer(timing.user_blocks);
        parallel_for(N, threads, [&](std::size_t n) {
          BlockProblem prob;
          prob.k = K;
          prob.lin = ulin.data() + n * K;
          prob.expw = sums.b.data() + t * K;
          prob.shift = user_shift.data() + n * K;
          prob.prev = t == 0 ? prior_u.data()
                             : vs.u_mean.data() + ((t - 1) * N + n) * K;
          prob.next = t + 1 < T ? vs.u_mean.data() + ((t + 1) * N + n) * K
                                : nullptr;
          prob.inv_var = inv_var_u;
          solve_block(prob, vs.u_mean.data() + (t * N + n) * K,
                      vs.u_log_sd.data() + (t * N + n) * K, solver);
        });
      }
      {
        PhaseTimer timer(timing.rate_sums);
        refresh_user_sums(vs, user_shift.data(), t, sums, threads);
      }

      {
        PhaseTimer timer(timing.observation);
        parallel_for(M, threads, [&](std::size_t m) {
          item_lin(slice, phi_t, m, K, vlin.data() + m * K);
        });
      }
      {
        PhaseTimer timer(timing.item_blocks);
        parallel_for(M, threads, [&](std::size_t m) {
          BlockProblem prob;
          prob.k = K;
          prob.lin = vlin.data() + m * K;
          prob.expw = sums.a.data() + t * K;
          prob.shift = item_shift.data() + m * K;
          prob.prev = t == 0 ? prior_v.data()
                             : vs.v_mean.data() + ((t - 1) * M + m) * K;
          prob.next = t + 1 < T ? vs.v_mean.data() + ((t + 1) * M + m) * K
                                : nullptr;
          prob.inv_var = inv_var_v;
          solve_block(prob, vs.v_mean.data() + (t * M + m) * K,
                      vs.v_log_sd.data() + (t * M + m) * K, solver);
        });
      }
      {
        PhaseTimer timer(timing.rate_sums);
        refresh_item_sums(vs, item_shift.data(), t, sums, threads);
      }
      {
        PhaseTimer timer(timing.observation);
        update_phi_step(tensor, vs, t, res.phi, threads);
      }
    }

    {
      PhaseTimer timer(timing.globals);
      parallel_for(N, threads, [&](std::size_t n) {
        std::vector<double> lin(K), expw(K);
        global_user_lin(tensor, res.phi, n, K, lin.data());
        global_user_expw(vs, sums, n, expw.data());
        BlockProblem prob;
        prob.k = K;
        prob.lin = lin.data();
        prob.expw = expw.data();
        prob.prev = prior_ubar.data();
        prob.inv_var = inv_var_ubar;
        solve_block(prob, vs.ubar_mean.data() + n * K,
                    vs.ubar_log_sd.data() + n * K, solver);
      });
      refresh_user_shift();
    }
    {
      PhaseTimer timer(timing.rate_sums);
      for (std::size_t t = 0; t < T; ++t) {
        refresh_user_sums(vs, user_shift.data(), t, sums, threads);
      }
    }
    {
      PhaseTimer timer(timing.globals);
      parallel_for(M, threads, [&](std::size_t m) {
        std::vector<double> lin(K), expw(K);
        global_item_lin(tensor, res.phi, m, K, lin.data());
        global_item_expw(vs, sums, m, expw.data());
        BlockProblem prob;
        prob.k = K;
        prob.lin = lin.data();
        prob.expw = expw.data();
        prob.prev = prior_vbar.data();
        prob.inv_var = inv_var_vbar;
        solve_block(prob, vs.vbar_mean.data() + m * K,
                    vs.vbar_log_sd.data() + m * K, solver);
      });
      refresh_item_shift();
    }
    {
      PhaseTimer timer(timing.rate_sums);
      for (std::size_t t = 0; t < T; ++t) {
        refresh_item_sums(vs, item_shift.data(), t, sums, threads);
      }
    }

    double bound;
    {
      PhaseTimer timer(timing.elbo);
      bound = elbo_with_sums(tensor, hp, vs, res.phi, sums, threads);
    }

    res.elbo_trace.push_back(bound);
    res.timings.push_back(timing);
    res.sweeps = sweep + 1;
    if (on_sweep) on_sweep(sweep, bound, timing);

    if (sweep > 0) {
      const double prev = res.elbo_trace[sweep - 1];
      const double rel =
          std::fabs(bound - prev) / std::max(std::fabs(prev), 1e-12);
      if (rel < cfg.tolerance) {
        res.converged = true;
        break;
      }
    }
  }
  return res;
}

}  // namespace dpf
