#include "dpf/model.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <random>
#include <stdexcept>

#include "dpf/parallel.hpp"
#include "dpf/rng.hpp"

namespace dpf {

void Hyperparams::validate() const {
  if (k < 1) throw std::invalid_argument("hyperparams: k must be >= 1");
  for (double s : {sigma_u, sigma_v, sigma_ubar, sigma_vbar})
    if (!(s > 0.0)) throw std::invalid_argument("hyperparams: sigmas must be > 0");
}

double rate(const LatentState& state, std::uint32_t n, std::uint32_t m,
            std::uint32_t t) {
  if (n >= state.n_users || m >= state.n_items || t >= state.n_steps)
    throw std::out_of_range("rate: index out of range");
  const auto u = state.u_at(n, t);
  const auto v = state.v_at(m, t);
  const auto ub = state.ubar_at(n);
  const auto vb = state.vbar_at(m);
  double sum = 0.0;
  for (std::uint32_t kk = 0; kk < state.k; ++kk)
    sum += std::exp(u[kk] + ub[kk] + v[kk] + vb[kk]);
  return sum;
}

namespace {

// Globals from their prior, then the chain: N(mu, sigma^2) at t = 1 and
// N(previous, sigma^2) afterwards.
void sample_entity(std::mt19937_64& eng, std::span<double> glob,
                   double* dyn /* stride entity_count * k per step */,
                   std::size_t step_stride, std::uint32_t n_steps,
                   std::uint32_t k, double mu_glob, double sigma_glob,
                   double mu_dyn, double sigma_dyn) {
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::uint32_t kk = 0; kk < k; ++kk)
    glob[kk] = mu_glob + sigma_glob * unit(eng);
  for (std::uint32_t kk = 0; kk < k; ++kk) {
    double prev = mu_dyn;
    for (std::uint32_t t = 0; t < n_steps; ++t) {
      const double val = prev + sigma_dyn * unit(eng);
      dyn[step_stride * t + kk] = val;
      prev = val;
    }
  }
}

}  // namespace

SimResult simulate(const Hyperparams& hp, std::uint32_t n_users,
                   std::uint32_t n_items, std::uint32_t n_steps,
                   std::uint64_t seed, unsigned threads) {
  // Unlike inference, sampling tolerates zero-variance (constant) chains.
  if (hp.k < 1) throw std::invalid_argument("hyperparams: k must be >= 1");
  for (double s : {hp.sigma_u, hp.sigma_v, hp.sigma_ubar, hp.sigma_vbar}) {
    if (!(s >= 0.0)) {
      throw std::invalid_argument("hyperparams: sigmas must be >= 0");
    }
  }
  if (n_users < 1 || n_items < 1 || n_steps < 1)
    throw std::invalid_argument("simulate: dimensions must be positive");

  SimResult result;
  LatentState& st = result.state;
  st = LatentState(n_users, n_items, n_steps, hp.k);

  const std::size_t user_stride = static_cast<std::size_t>(n_users) * hp.k;
  const std::size_t item_stride = static_cast<std::size_t>(n_items) * hp.k;
  const unsigned nt = effective_threads(threads);

  parallel_for(n_users, nt, [&](std::size_t n) {
    auto eng = make_engine(seed, Stream::UserFactors, n);
    sample_entity(eng, st.ubar_at(static_cast<std::uint32_t>(n)),
                  st.u.data() + n * hp.k, user_stride, n_steps, hp.k,
                  hp.mu_ubar, hp.sigma_ubar, hp.mu_u, hp.sigma_u);
  });
  parallel_for(n_items, nt, [&](std::size_t m) {
    auto eng = make_engine(seed, Stream::ItemFactors, m);
    sample_entity(eng, st.vbar_at(static_cast<std::uint32_t>(m)),
                  st.v.data() + m * hp.k, item_stride, n_steps, hp.k,
                  hp.mu_vbar, hp.sigma_vbar, hp.mu_v, hp.sigma_v);
  });

  // One observation stream per user; draw order over (t, m) is fixed.
  std::vector<std::vector<TensorEntry>> per_user(n_users);
  parallel_for(n_users, nt, [&](std::size_t n) {
    auto eng = make_engine(seed, Stream::Observations, n);
    const auto un = static_cast<std::uint32_t>(n);
    for (std::uint32_t t = 0; t < n_steps; ++t) {
      const auto u = st.u_at(un, t);
      const auto ub = st.ubar_at(un);
      for (std::uint32_t m = 0; m < n_items; ++m) {
        const auto v = st.v_at(m, t);
        const auto vb = st.vbar_at(m);
        double lam = 0.0;
        for (std::uint32_t kk = 0; kk < hp.k; ++kk)
          lam += std::exp(u[kk] + ub[kk] + v[kk] + vb[kk]);
        std::poisson_distribution<std::uint32_t> pois(lam);
        const std::uint32_t y = pois(eng);
        if (y > 0) per_user[n].push_back({un, m, t, y});
      }
    }
  });

  std::vector<TensorEntry> entries;
  for (const auto& pu : per_user)
    entries.insert(entries.end(), pu.begin(), pu.end());

  std::vector<std::string> user_ids(n_users), item_ids(n_items);
  char buf[32];
  for (std::uint32_t n = 0; n < n_users; ++n) {
    std::snprintf(buf, sizeof buf, "u%06u", n);
    user_ids[n] = buf;
  }
  for (std::uint32_t m = 0; m < n_items; ++m) {
    std::snprintf(buf, sizeof buf, "i%06u", m);
    item_ids[m] = buf;
  }
  result.tensor = build_tensor(std::move(entries), n_users, n_items, n_steps,
                               std::move(user_ids), std::move(item_ids));
  return result;
}

void write_state(const LatentState& state, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write state file: " + path);
  out << "dpf-state 1\n";
  out << state.n_users << ' ' << state.n_items << ' ' << state.n_steps << ' '
      << state.k << '\n';
  char buf[32];
  auto dump = [&](const std::vector<double>& xs) {
    for (double x : xs) {
      std::snprintf(buf, sizeof buf, "%.17g", x);
      out << buf << '\n';
    }
  };
  dump(state.u);
  dump(state.v);
  dump(state.ubar);
  dump(state.vbar);
  if (!out) throw std::runtime_error("write failed: " + path);
}

LatentState read_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open state file: " + path);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "dpf-state" || version != 1)
    throw std::runtime_error("not a dpf-state v1 file: " + path);
  std::uint32_t n, m, t, k;
  if (!(in >> n >> m >> t >> k))
    throw std::runtime_error("dpf-state: bad dimension line");
  LatentState st(n, m, t, k);
  auto slurp = [&](std::vector<double>& xs) {
    for (double& x : xs)
      if (!(in >> x)) throw std::runtime_error("dpf-state: truncated values");
  };
  slurp(st.u);
  slurp(st.v);
  slurp(st.ubar);
  slurp(st.vbar);
  return st;
}

}  // namespace dpf
