#pragma once

#include <string>
#include <vector>

#include "dpf/checkpoint.hpp"

// Plain-TSV views of a fitted posterior for external plotting. Values are
// printed with enough digits to reparse to the identical double.

namespace dpf {

// Entity ids to export; both lists empty means everything.
struct EntitySelection {
  std::vector<std::string> users;
  std::vector<std::string> items;
};

// One row per (entity, factor, step): the expression level
// E[u_{nk,t}] + E[ubar_{nk}] (item analogue), sorted by entity index,
// factor, step, users before items.
void export_trajectories(const FittedModel& model,
                         const EntitySelection& entities,
                         const std::string& path);

// One row per (entity, factor) with the global posterior mean.
void export_global_factors(const FittedModel& model,
                           const EntitySelection& entities,
                           const std::string& path);

// One row per step, one column per factor: the mean over users of the
// posterior expectation E[exp(u + ubar)] (or of the raw expression level
// when raw is set). normalize rescales each row to sum to 1, removing
// overall activity growth.
void export_aggregate_factors(const FittedModel& model,
                              const std::string& path, bool raw,
                              bool normalize);

}  // namespace dpf
