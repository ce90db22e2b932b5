#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

// Sparse user x item x time interaction data: raw event parsing, bucketing
// into discrete steps, binarization, and the rolling train/test split.

namespace dpf {

struct RawEvent {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;  // seconds since epoch, >= 0
  std::uint32_t count = 1;
};

struct TimeBucketing {
  std::int64_t origin = 0;
  std::int64_t granularity = 1;  // seconds, > 0

  std::uint32_t step_of(std::int64_t ts) const {
    return static_cast<std::uint32_t>((ts - origin) / granularity);
  }
};

struct TensorEntry {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::uint32_t step = 0;
  std::uint32_t count = 0;
};

// One time step in CSR form (by user) plus an index grouped by item.
struct StepSlice {
  std::vector<std::uint32_t> row_ptr;  // n_users + 1
  std::vector<std::uint32_t> users;    // nnz, aligned with items/counts
  std::vector<std::uint32_t> items;    // nnz
  std::vector<std::uint32_t> counts;   // nnz, each >= 1
  std::vector<std::uint32_t> col_ptr;    // n_items + 1
  std::vector<std::uint32_t> col_entry;  // nnz entry indices grouped by item

  std::size_t nnz() const { return items.size(); }
};

struct InteractionTensor {
  std::uint32_t n_users = 0;
  std::uint32_t n_items = 0;
  std::uint32_t n_steps = 0;
  std::vector<StepSlice> steps;

  // Bijections between retained ids and [0, n_users) / [0, n_items).
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::unordered_map<std::string, std::uint32_t> user_index;
  std::unordered_map<std::string, std::uint32_t> item_index;

  std::size_t total_nonzeros() const;
  std::uint64_t total_count() const;
  std::size_t max_step_nonzeros() const;  // R = max_t R_t
  bool is_binary() const;

  // Entries in canonical (step, user, item) order.
  std::vector<TensorEntry> entries() const;
};

// Assembles the CSR/CSC slices from an entry list; duplicate (user, item,
// step) keys are summed. Ids give the index->id bijections.
InteractionTensor build_tensor(std::vector<TensorEntry> entries,
                               std::uint32_t n_users, std::uint32_t n_items,
                               std::uint32_t n_steps,
                               std::vector<std::string> user_ids,
                               std::vector<std::string> item_ids);

// Buckets events into discrete steps. Indices are assigned in order of first
// appearance; T = max step + 1, so trailing-empty interior steps survive.
// Throws std::invalid_argument on an empty list or a timestamp < origin.
InteractionTensor bucket_events(const std::vector<RawEvent>& events,
                                const TimeBucketing& bucketing);

// Every stored count becomes 1; the sparsity pattern is unchanged.
InteractionTensor binarize(const InteractionTensor& tensor);

struct RollingSplit {
  InteractionTensor train;  // steps [0, eval_step)
  InteractionTensor test;   // single step, indices in the train id space
  std::uint32_t eval_step = 0;
  // Test entries removed because their user/item never occurs in train.
  std::size_t dropped_users = 0;
  std::size_t dropped_items = 0;
  std::size_t dropped_entries = 0;
};

// Train on everything before eval_step, test on eval_step. Train is
// reindexed to the entities it actually contains (the model has factors for
// nothing else); cold test entries are dropped and counted. Test pairs that
// repeat a training pair are kept.
RollingSplit rolling_split(const InteractionTensor& tensor,
                           std::uint32_t eval_step);

// TSV events: "user_id<TAB>item_id<TAB>timestamp[<TAB>count]" per line, with
// an optional header (first line whose timestamp field is not an integer).
// Malformed lines raise with the line number.
std::vector<RawEvent> read_events_tsv(const std::string& path);
void write_events_tsv(const std::vector<RawEvent>& events,
                      const std::string& path);

// Versioned plain-text tensor serialization (see README for the layout).
void write_tensor(const InteractionTensor& tensor, std::ostream& out);
void write_tensor(const InteractionTensor& tensor, const std::string& path);
InteractionTensor read_tensor(std::istream& in);
InteractionTensor read_tensor(const std::string& path);

}  // namespace dpf
