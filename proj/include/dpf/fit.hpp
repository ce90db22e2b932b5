#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dpf/model.hpp"
#include "dpf/tensor.hpp"
#include "dpf/variational.hpp"

// Coordinate ascent on the bound. One sweep walks the steps in order; at
// each step it solves every user block, then every item block, then resets
// the auxiliary weights; global blocks follow once per sweep. Each move
// maximizes the bound over its own coordinates with the rest held fixed, so
// the per-sweep bound never decreases.

namespace dpf {

struct FitConfig {
  int max_sweeps = 500;
  double tolerance = 1e-6;   // relative bound change that counts as converged
  int inner_iters = 15;      // quasi-Newton iterations per block
  int lbfgs_memory = 5;
  double init_scale = 0.01;
  double init_stddev = 0.1;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

// Seconds spent per phase during one sweep. Entry-proportional work (weight
// gathering, auxiliary updates) lands in observation; per-entity solves in
// user_blocks / item_blocks; rate-sum refreshes and the bound evaluation are
// kept separate.
struct SweepTiming {
  double user_blocks = 0.0;
  double item_blocks = 0.0;
  double observation = 0.0;
  double rate_sums = 0.0;
  double globals = 0.0;
  double elbo = 0.0;

  double total() const {
    return user_blocks + item_blocks + observation + rate_sums + globals +
           elbo;
  }
};

struct FitResult {
  VariationalState state;
  AuxWeights phi;
  std::vector<double> elbo_trace;  // one value per completed sweep
  std::vector<SweepTiming> timings;
  int sweeps = 0;
  bool converged = false;
};

using SweepCallback =
    std::function<void(int sweep, double elbo, const SweepTiming&)>;

FitResult fit(const InteractionTensor& tensor, const Hyperparams& hp,
              const FitConfig& cfg, const SweepCallback& on_sweep = nullptr);

}  // namespace dpf
