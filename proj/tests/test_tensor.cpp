#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dpf/tensor.hpp"

using dpf::InteractionTensor;
using dpf::RawEvent;
using dpf::TensorEntry;
using dpf::TimeBucketing;

namespace {

std::string temp_path(const char* name) {
  return std::string("/tmp/dpf_tensor_test_") + name;
}

}  // namespace

TEST_CASE("bucket_events assigns floor-division steps") {
  std::vector<RawEvent> events = {
      {"a", "x", 0, 1}, {"a", "x", 100, 1}, {"a", "x", 200, 1}};
  const auto tensor = dpf::bucket_events(events, {0, 100});
  CHECK(tensor.n_steps == 3);
  CHECK(tensor.total_nonzeros() == 3);
  for (std::uint32_t t = 0; t < 3; ++t) CHECK(tensor.steps[t].nnz() == 1);
}

TEST_CASE("bucket_events sums same-bucket duplicates") {
  std::vector<RawEvent> events = {{"a", "x", 10, 1}, {"a", "x", 20, 1}};
  const auto tensor = dpf::bucket_events(events, {0, 100});
  CHECK(tensor.n_steps == 1);
  CHECK(tensor.total_nonzeros() == 1);
  CHECK(tensor.steps[0].counts[0] == 2);
}

TEST_CASE("bucket_events keeps empty interior steps") {
  std::vector<RawEvent> events = {{"a", "x", 0, 1}, {"b", "y", 400, 1}};
  const auto tensor = dpf::bucket_events(events, {0, 100});
  CHECK(tensor.n_steps == 5);
  CHECK(tensor.steps[1].nnz() == 0);
  CHECK(tensor.steps[2].nnz() == 0);
  CHECK(tensor.steps[3].nnz() == 0);
}

TEST_CASE("bucket_events conserves the total count") {
  std::vector<RawEvent> events;
  std::uint64_t total = 0;
  for (int i = 0; i < 200; ++i) {
    const std::uint32_t c = 1 + (i * 7) % 5;
    events.push_back({"u" + std::to_string(i % 13),
                      "i" + std::to_string(i % 17),
                      static_cast<std::int64_t>((i * 37) % 1000), c});
    total += c;
  }
  const auto tensor = dpf::bucket_events(events, {0, 250});
  CHECK(tensor.total_count() == total);
}

TEST_CASE("bucket_events rejects bad input") {
  CHECK_THROWS(dpf::bucket_events({}, {0, 100}));
  CHECK_THROWS(dpf::bucket_events({{"a", "x", 50, 1}}, {100, 10}));
  CHECK_THROWS(dpf::bucket_events({{"a", "x", 50, 1}}, {0, 0}));
  // count-zero events carry no clicks; a list of only those is empty input
  CHECK_THROWS(dpf::bucket_events({{"a", "x", 50, 0}}, {0, 10}));
}

TEST_CASE("index maps are first-appearance bijections") {
  std::vector<RawEvent> events = {
      {"carol", "m2", 0, 1}, {"alice", "m1", 0, 1}, {"carol", "m1", 10, 1}};
  const auto tensor = dpf::bucket_events(events, {0, 100});
  REQUIRE(tensor.n_users == 2);
  REQUIRE(tensor.n_items == 2);
  CHECK(tensor.user_ids[0] == "carol");
  CHECK(tensor.user_ids[1] == "alice");
  CHECK(tensor.item_ids[0] == "m2");
  CHECK(tensor.item_ids[1] == "m1");
  CHECK(tensor.user_index.at("alice") == 1);
  CHECK(tensor.item_index.at("m1") == 1);
}

TEST_CASE("binarize clamps counts and preserves the pattern") {
  std::vector<TensorEntry> entries = {
      {0, 0, 0, 3}, {0, 1, 0, 1}, {1, 0, 1, 7}};
  const auto tensor =
      dpf::build_tensor(entries, 2, 2, 2, {"u0", "u1"}, {"i0", "i1"});
  const auto bin = dpf::binarize(tensor);
  CHECK(bin.is_binary());
  CHECK_FALSE(tensor.is_binary());
  CHECK(bin.total_nonzeros() == tensor.total_nonzeros());
  for (std::uint32_t t = 0; t < 2; ++t) {
    CHECK(bin.steps[t].nnz() == tensor.steps[t].nnz());
  }
  const auto entries_bin = bin.entries();
  for (const auto& e : entries_bin) CHECK(e.count == 1);
}

TEST_CASE("build_tensor sums duplicate keys and validates ranges") {
  std::vector<TensorEntry> dup = {{0, 0, 0, 2}, {0, 0, 0, 5}};
  const auto tensor = dpf::build_tensor(dup, 1, 1, 1, {"u"}, {"i"});
  CHECK(tensor.total_nonzeros() == 1);
  CHECK(tensor.steps[0].counts[0] == 7);

  CHECK_THROWS(dpf::build_tensor({{1, 0, 0, 1}}, 1, 1, 1, {"u"}, {"i"}));
  CHECK_THROWS(dpf::build_tensor({{0, 0, 2, 1}}, 1, 1, 2, {"u"}, {"i"}));
  CHECK_THROWS(dpf::build_tensor({{0, 0, 0, 0}}, 1, 1, 1, {"u"}, {"i"}));
}

TEST_CASE("csr and csc views agree") {
  std::vector<TensorEntry> entries = {
      {0, 1, 0, 2}, {1, 0, 0, 1}, {1, 1, 0, 4}, {2, 0, 0, 3}};
  const auto tensor = dpf::build_tensor(entries, 3, 2, 1, {"a", "b", "c"},
                                        {"x", "y"});
  const auto& s = tensor.steps[0];
  std::uint64_t by_rows = 0, by_cols = 0;
  for (std::size_t e = 0; e < s.nnz(); ++e) by_rows += s.counts[e];
  for (std::size_t m = 0; m < 2; ++m) {
    for (std::size_t j = s.col_ptr[m]; j < s.col_ptr[m + 1]; ++j) {
      const std::size_t e = s.col_entry[j];
      CHECK(s.items[e] == m);
      by_cols += s.counts[e];
    }
  }
  CHECK(by_rows == by_cols);
}

TEST_CASE("rolling_split partitions steps and reindexes train") {
  // user "c" appears only at the eval step; item "z" likewise.
  std::vector<RawEvent> events = {{"a", "x", 0, 1},   {"b", "y", 0, 1},
                                  {"a", "y", 100, 1}, {"c", "x", 200, 1},
                                  {"a", "z", 200, 1}, {"b", "x", 200, 2}};
  const auto tensor = dpf::bucket_events(events, {0, 100});
  REQUIRE(tensor.n_steps == 3);

  const auto split = dpf::rolling_split(tensor, 2);
  CHECK(split.train.n_steps == 2);
  CHECK(split.train.n_users == 2);  // a, b
  CHECK(split.train.n_items == 2);  // x, y
  CHECK(split.test.n_steps == 1);
  CHECK(split.test.n_users == split.train.n_users);
  CHECK(split.test.total_nonzeros() == 1);  // only (b, x) survives
  CHECK(split.dropped_users == 1);          // c
  CHECK(split.dropped_items == 1);          // z
  CHECK(split.dropped_entries == 2);

  const auto& test_slice = split.test.steps[0];
  const std::size_t b_idx = split.train.user_index.at("b");
  const std::size_t x_idx = split.train.item_index.at("x");
  CHECK(test_slice.users[0] == b_idx);
  CHECK(test_slice.items[0] == x_idx);
  CHECK(test_slice.counts[0] == 2);

  CHECK_THROWS(dpf::rolling_split(tensor, 0));
  CHECK_THROWS(dpf::rolling_split(tensor, 3));
}

TEST_CASE("rolling_split keeps repeated train/test pairs") {
  std::vector<RawEvent> events = {{"a", "x", 0, 1}, {"a", "x", 100, 1}};
  const auto tensor = dpf::bucket_events(events, {0, 100});
  const auto split = dpf::rolling_split(tensor, 1);
  CHECK(split.train.total_nonzeros() == 1);
  CHECK(split.test.total_nonzeros() == 1);
  CHECK(split.dropped_entries == 0);
}

TEST_CASE("eval_step 1 degenerates train to a single step") {
  std::vector<RawEvent> events = {
      {"a", "x", 0, 1}, {"b", "y", 50, 1}, {"a", "y", 150, 1},
      {"b", "x", 250, 1}};
  const auto tensor = dpf::bucket_events(events, {0, 100});
  const auto split = dpf::rolling_split(tensor, 1);
  CHECK(split.train.n_steps == 1);
  CHECK(split.train.total_nonzeros() == 2);
  CHECK(split.test.total_nonzeros() == 1);
}

TEST_CASE("events tsv round-trips and reports malformed lines") {
  const std::string path = temp_path("events.tsv");
  std::vector<RawEvent> events = {{"a", "x", 12, 1}, {"b", "y", 99, 4}};
  dpf::write_events_tsv(events, path);
  const auto back = dpf::read_events_tsv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].user_id == "a");
  CHECK(back[1].count == 4);
  CHECK(back[1].timestamp == 99);

  {
    std::ofstream bad(path);
    bad << "user_id\titem_id\ttimestamp\tcount\n";
    bad << "a\tx\tnotanumber\t1\n";
  }
  try {
    dpf::read_events_tsv(path);
    FAIL("expected a parse error");
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":2") != std::string::npos);  // line number present
  }
  std::remove(path.c_str());
}

TEST_CASE("tensor file round-trips") {
  std::vector<RawEvent> events = {
      {"a", "x", 0, 2}, {"b", "y", 120, 1}, {"a", "y", 260, 3}};
  const auto tensor = dpf::bucket_events(events, {0, 100});
  const std::string path = temp_path("tensor.txt");
  dpf::write_tensor(tensor, path);
  const auto back = dpf::read_tensor(path);
  CHECK(back.n_users == tensor.n_users);
  CHECK(back.n_items == tensor.n_items);
  CHECK(back.n_steps == tensor.n_steps);
  CHECK(back.user_ids == tensor.user_ids);
  CHECK(back.item_ids == tensor.item_ids);
  const auto a = tensor.entries();
  const auto b = back.entries();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].user == b[i].user);
    CHECK(a[i].item == b[i].item);
    CHECK(a[i].step == b[i].step);
    CHECK(a[i].count == b[i].count);
  }
  std::remove(path.c_str());

  std::ostringstream out;
  dpf::write_tensor(tensor, out);
  std::istringstream in("not a tensor\n");
  CHECK_THROWS(dpf::read_tensor(in));
}
