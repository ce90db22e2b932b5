#include "dpf/tensor.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace dpf {

namespace {

std::uint32_t intern(const std::string& id,
                     std::unordered_map<std::string, std::uint32_t>& index,
                     std::vector<std::string>& ids) {
  auto [it, inserted] = index.try_emplace(id, static_cast<std::uint32_t>(ids.size()));
  if (inserted) ids.push_back(id);
  return it->second;
}

[[noreturn]] void line_error(const std::string& path, std::size_t line_no,
                             const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

template <typename T>
bool parse_int(const std::string& s, T& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc{} && ptr == e;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

}  // namespace

std::size_t InteractionTensor::total_nonzeros() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.nnz();
  return n;
}

std::uint64_t InteractionTensor::total_count() const {
  std::uint64_t n = 0;
  for (const auto& s : steps)
    for (std::uint32_t c : s.counts) n += c;
  return n;
}

std::size_t InteractionTensor::max_step_nonzeros() const {
  std::size_t r = 0;
  for (const auto& s : steps) r = std::max(r, s.nnz());
  return r;
}

bool InteractionTensor::is_binary() const {
  for (const auto& s : steps)
    for (std::uint32_t c : s.counts)
      if (c != 1) return false;
  return true;
}

std::vector<TensorEntry> InteractionTensor::entries() const {
  std::vector<TensorEntry> out;
  out.reserve(total_nonzeros());
  for (std::uint32_t t = 0; t < n_steps; ++t) {
    const StepSlice& s = steps[t];
    for (std::size_t e = 0; e < s.nnz(); ++e)
      out.push_back({s.users[e], s.items[e], t, s.counts[e]});
  }
  return out;
}

InteractionTensor build_tensor(std::vector<TensorEntry> entries,
                               std::uint32_t n_users, std::uint32_t n_items,
                               std::uint32_t n_steps,
                               std::vector<std::string> user_ids,
                               std::vector<std::string> item_ids) {
  if (n_users == 0 || n_items == 0 || n_steps == 0)
    throw std::invalid_argument("tensor dimensions must be positive");
  for (const TensorEntry& e : entries) {
    if (e.user >= n_users || e.item >= n_items || e.step >= n_steps)
      throw std::invalid_argument("tensor entry index out of range");
    if (e.count == 0)
      throw std::invalid_argument("tensor entry count must be >= 1");
  }

  std::sort(entries.begin(), entries.end(),
            [](const TensorEntry& a, const TensorEntry& b) {
              if (a.step != b.step) return a.step < b.step;
              if (a.user != b.user) return a.user < b.user;
              return a.item < b.item;
            });

  InteractionTensor t;
  t.n_users = n_users;
  t.n_items = n_items;
  t.n_steps = n_steps;
  t.user_ids = std::move(user_ids);
  t.item_ids = std::move(item_ids);
  for (std::uint32_t i = 0; i < n_users; ++i) t.user_index[t.user_ids[i]] = i;
  for (std::uint32_t i = 0; i < n_items; ++i) t.item_index[t.item_ids[i]] = i;
  t.steps.resize(n_steps);

  std::size_t pos = 0;
  for (std::uint32_t step = 0; step < n_steps; ++step) {
    StepSlice& s = t.steps[step];
    const std::size_t begin = pos;
    while (pos < entries.size() && entries[pos].step == step) {
      // Duplicates are adjacent after sorting; sum them.
      const TensorEntry& e = entries[pos];
      if (!s.users.empty() && s.users.back() == e.user &&
          s.items.back() == e.item) {
        s.counts.back() += e.count;
      } else {
        s.users.push_back(e.user);
        s.items.push_back(e.item);
        s.counts.push_back(e.count);
      }
      ++pos;
    }
    (void)begin;

    s.row_ptr.assign(n_users + 1, 0);
    for (std::uint32_t u : s.users) ++s.row_ptr[u + 1];
    for (std::uint32_t u = 0; u < n_users; ++u) s.row_ptr[u + 1] += s.row_ptr[u];

    s.col_ptr.assign(n_items + 1, 0);
    for (std::uint32_t m : s.items) ++s.col_ptr[m + 1];
    for (std::uint32_t m = 0; m < n_items; ++m) s.col_ptr[m + 1] += s.col_ptr[m];
    s.col_entry.resize(s.nnz());
    std::vector<std::uint32_t> cursor(s.col_ptr.begin(), s.col_ptr.end() - 1);
    for (std::uint32_t e = 0; e < s.nnz(); ++e)
      s.col_entry[cursor[s.items[e]]++] = e;
  }
  return t;
}

InteractionTensor bucket_events(const std::vector<RawEvent>& events,
                                const TimeBucketing& bucketing) {
  if (events.empty())
    throw std::invalid_argument("bucket_events: empty event list");
  if (bucketing.granularity <= 0)
    throw std::invalid_argument("bucket_events: granularity must be positive");

  std::unordered_map<std::string, std::uint32_t> user_index, item_index;
  std::vector<std::string> user_ids, item_ids;
  std::vector<TensorEntry> entries;
  entries.reserve(events.size());
  std::uint32_t max_step = 0;

  for (std::size_t i = 0; i < events.size(); ++i) {
    const RawEvent& ev = events[i];
    if (ev.timestamp < bucketing.origin)
      throw std::invalid_argument(
          "bucket_events: event " + std::to_string(i) + " timestamp " +
          std::to_string(ev.timestamp) + " precedes origin " +
          std::to_string(bucketing.origin));
    if (ev.count == 0) continue;
    TensorEntry e;
    e.user = intern(ev.user_id, user_index, user_ids);
    e.item = intern(ev.item_id, item_index, item_ids);
    e.step = bucketing.step_of(ev.timestamp);
    e.count = ev.count;
    max_step = std::max(max_step, e.step);
    entries.push_back(e);
  }
  if (entries.empty())
    throw std::invalid_argument("bucket_events: all events have count 0");

  const auto n_users = static_cast<std::uint32_t>(user_ids.size());
  const auto n_items = static_cast<std::uint32_t>(item_ids.size());
  return build_tensor(std::move(entries), n_users, n_items, max_step + 1,
                      std::move(user_ids), std::move(item_ids));
}

InteractionTensor binarize(const InteractionTensor& tensor) {
  InteractionTensor out = tensor;
  for (StepSlice& s : out.steps) std::fill(s.counts.begin(), s.counts.end(), 1u);
  return out;
}

RollingSplit rolling_split(const InteractionTensor& tensor,
                           std::uint32_t eval_step) {
  if (eval_step < 1 || eval_step >= tensor.n_steps)
    throw std::invalid_argument("rolling_split: eval_step must be in [1, T)");

  // Entities with at least one observation before eval_step keep a factor.
  std::vector<std::uint32_t> user_map(tensor.n_users, UINT32_MAX);
  std::vector<std::uint32_t> item_map(tensor.n_items, UINT32_MAX);
  std::vector<std::string> train_users, train_items;
  std::vector<TensorEntry> train_entries;
  for (std::uint32_t t = 0; t < eval_step; ++t) {
    const StepSlice& s = tensor.steps[t];
    for (std::size_t e = 0; e < s.nnz(); ++e) {
      const std::uint32_t u = s.users[e];
      const std::uint32_t m = s.items[e];
      if (user_map[u] == UINT32_MAX) {
        user_map[u] = static_cast<std::uint32_t>(train_users.size());
        train_users.push_back(tensor.user_ids[u]);
      }
      if (item_map[m] == UINT32_MAX) {
        item_map[m] = static_cast<std::uint32_t>(train_items.size());
        train_items.push_back(tensor.item_ids[m]);
      }
      train_entries.push_back({user_map[u], item_map[m], t, s.counts[e]});
    }
  }
  if (train_entries.empty())
    throw std::invalid_argument("rolling_split: no observations before eval_step");

  RollingSplit split;
  split.eval_step = eval_step;
  split.train = build_tensor(std::move(train_entries),
                             static_cast<std::uint32_t>(train_users.size()),
                             static_cast<std::uint32_t>(train_items.size()),
                             eval_step, train_users, train_items);

  std::vector<TensorEntry> test_entries;
  std::vector<bool> dropped_user_seen(tensor.n_users, false);
  std::vector<bool> dropped_item_seen(tensor.n_items, false);
  const StepSlice& s = tensor.steps[eval_step];
  for (std::size_t e = 0; e < s.nnz(); ++e) {
    const std::uint32_t u = s.users[e];
    const std::uint32_t m = s.items[e];
    const bool cold_user = user_map[u] == UINT32_MAX;
    const bool cold_item = item_map[m] == UINT32_MAX;
    if (cold_user || cold_item) {
      ++split.dropped_entries;
      if (cold_user && !dropped_user_seen[u]) {
        dropped_user_seen[u] = true;
        ++split.dropped_users;
      }
      if (cold_item && !dropped_item_seen[m]) {
        dropped_item_seen[m] = true;
        ++split.dropped_items;
      }
      continue;
    }
    test_entries.push_back({user_map[u], item_map[m], 0, s.counts[e]});
  }

  if (test_entries.empty()) {
    // Keep an empty single-step shell so callers can inspect dims and drops.
    split.test.n_users = split.train.n_users;
    split.test.n_items = split.train.n_items;
    split.test.n_steps = 1;
    split.test.steps.resize(1);
    split.test.steps[0].row_ptr.assign(split.train.n_users + 1, 0);
    split.test.steps[0].col_ptr.assign(split.train.n_items + 1, 0);
    split.test.user_ids = split.train.user_ids;
    split.test.item_ids = split.train.item_ids;
    split.test.user_index = split.train.user_index;
    split.test.item_index = split.train.item_index;
  } else {
    split.test = build_tensor(std::move(test_entries), split.train.n_users,
                              split.train.n_items, 1, split.train.user_ids,
                              split.train.item_ids);
  }
  return split;
}

std::vector<RawEvent> read_events_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open events file: " + path);

  std::vector<RawEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (line_no == 1 && (fields.size() == 3 || fields.size() == 4)) {
      // Optional header line, recognized by a non-numeric timestamp field.
      std::int64_t probe = 0;
      if (!parse_int(fields[2], probe)) continue;
    }
    if (fields.size() != 3 && fields.size() != 4)
      line_error(path, line_no, "expected 3 or 4 tab-separated fields, got " +
                                    std::to_string(fields.size()));
    RawEvent ev;
    ev.user_id = fields[0];
    ev.item_id = fields[1];
    if (ev.user_id.empty() || ev.item_id.empty())
      line_error(path, line_no, "empty user or item id");
    if (!parse_int(fields[2], ev.timestamp) || ev.timestamp < 0)
      line_error(path, line_no, "bad timestamp: '" + fields[2] + "'");
    if (fields.size() == 4) {
      if (!parse_int(fields[3], ev.count))
        line_error(path, line_no, "bad count: '" + fields[3] + "'");
    }
    events.push_back(std::move(ev));
  }
  return events;
}

void write_events_tsv(const std::vector<RawEvent>& events,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write events file: " + path);
  out << "user_id\titem_id\ttimestamp\tcount\n";
  for (const RawEvent& ev : events)
    out << ev.user_id << '\t' << ev.item_id << '\t' << ev.timestamp << '\t'
        << ev.count << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_tensor(const InteractionTensor& tensor, std::ostream& out) {
  out << "dpf-tensor 1\n";
  out << tensor.n_users << ' ' << tensor.n_items << ' ' << tensor.n_steps << ' '
      << tensor.total_nonzeros() << '\n';
  for (const std::string& id : tensor.user_ids) out << id << '\n';
  for (const std::string& id : tensor.item_ids) out << id << '\n';
  for (const TensorEntry& e : tensor.entries())
    out << e.user << ' ' << e.item << ' ' << e.step << ' ' << e.count << '\n';
}

void write_tensor(const InteractionTensor& tensor, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write tensor file: " + path);
  write_tensor(tensor, out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

InteractionTensor read_tensor(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "dpf-tensor" || version != 1)
    throw std::runtime_error("not a dpf-tensor v1 stream");
  std::uint32_t n_users, n_items, n_steps;
  std::size_t n_entries;
  if (!(in >> n_users >> n_items >> n_steps >> n_entries))
    throw std::runtime_error("dpf-tensor: bad dimension line");
  in.ignore();  // trailing newline

  std::vector<std::string> user_ids(n_users), item_ids(n_items);
  for (auto& id : user_ids)
    if (!std::getline(in, id) || id.empty())
      throw std::runtime_error("dpf-tensor: truncated user id list");
  for (auto& id : item_ids)
    if (!std::getline(in, id) || id.empty())
      throw std::runtime_error("dpf-tensor: truncated item id list");

  std::vector<TensorEntry> entries(n_entries);
  for (auto& e : entries)
    if (!(in >> e.user >> e.item >> e.step >> e.count))
      throw std::runtime_error("dpf-tensor: truncated entry list");
  return build_tensor(std::move(entries), n_users, n_items, n_steps,
                      std::move(user_ids), std::move(item_ids));
}

InteractionTensor read_tensor(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tensor file: " + path);
  return read_tensor(in);
}

}  // namespace dpf
