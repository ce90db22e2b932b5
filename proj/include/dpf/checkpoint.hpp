#pragma once

#include <string>
#include <vector>

#include "dpf/model.hpp"
#include "dpf/variational.hpp"

// A fitted model bundles the posterior with everything needed to score:
// hyperparameters, the id maps, and the bound trace from training. The file
// format is versioned little-endian binary; doubles keep their exact bit
// patterns, so write -> read -> write reproduces the file byte for byte.

namespace dpf {

struct FittedModel {
  Hyperparams hp;
  VariationalState state;
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::vector<double> elbo_trace;
};

void write_checkpoint(const FittedModel& model, const std::string& path);
FittedModel read_checkpoint(const std::string& path);

}  // namespace dpf
