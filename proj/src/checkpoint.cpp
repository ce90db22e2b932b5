#include "dpf/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace dpf {
namespace {

constexpr char kMagic[8] = {'d', 'p', 'f', 'c', 'k', 'p', 't', '1'};

class Writer {
 public:
  explicit Writer(const std::string& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for write");
  }

  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u64(std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, 8);
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64_array(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void string(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void string_array(const std::vector<std::string>& v) {
    u64(v.size());
    for (const auto& s : v) string(s);
  }

  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed: " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open " + path);
  }

  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) fail("truncated");
  }
  std::uint64_t u64() {
    unsigned char buf[8];
    bytes(buf, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<double> f64_array(std::size_t expect) {
    const std::uint64_t n = u64();
    if (n != expect) fail("array size mismatch");
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  std::vector<double> f64_array() {
    const std::uint64_t n = u64();
    check_count(n);
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  std::string string() {
    const std::uint64_t n = u64();
    check_count(n);
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::vector<std::string> string_array(std::size_t expect) {
    const std::uint64_t n = u64();
    if (n != expect) fail("id list size mismatch");
    std::vector<std::string> v(n);
    for (auto& s : v) s = string();
    return v;
  }
  void expect_eof() {
    char c;
    in_.read(&c, 1);
    if (!in_.eof()) fail("trailing bytes");
  }

  [[noreturn]] void fail(const std::string& why) {
    throw std::runtime_error(path_ + ": invalid checkpoint (" + why + ")");
  }

 private:
  void check_count(std::uint64_t n) {
    if (n > (std::uint64_t{1} << 40)) fail("implausible count");
  }

  std::string path_;
  std::ifstream in_;
};

}  // namespace

void write_checkpoint(const FittedModel& model, const std::string& path) {
  const VariationalState& vs = model.state;
  if (model.hp.k != vs.k) {
    throw std::invalid_argument("checkpoint: hyperparameter k differs from state");
  }
  if (model.user_ids.size() != vs.n_users ||
      model.item_ids.size() != vs.n_items) {
    throw std::invalid_argument("checkpoint: id list sizes differ from state");
  }
  Writer w(path);
  w.bytes(kMagic, sizeof(kMagic));
  w.u64(vs.n_users);
  w.u64(vs.n_items);
  w.u64(vs.n_steps);
  w.u64(vs.k);
  w.f64(model.hp.mu_u);
  w.f64(model.hp.sigma_u);
  w.f64(model.hp.mu_v);
  w.f64(model.hp.sigma_v);
  w.f64(model.hp.mu_ubar);
  w.f64(model.hp.sigma_ubar);
  w.f64(model.hp.mu_vbar);
  w.f64(model.hp.sigma_vbar);
  w.string_array(model.user_ids);
  w.string_array(model.item_ids);
  w.f64_array(vs.u_mean);
  w.f64_array(vs.u_log_sd);
  w.f64_array(vs.v_mean);
  w.f64_array(vs.v_log_sd);
  w.f64_array(vs.ubar_mean);
  w.f64_array(vs.ubar_log_sd);
  w.f64_array(vs.vbar_mean);
  w.f64_array(vs.vbar_log_sd);
  w.f64_array(model.elbo_trace);
  w.finish();
}

FittedModel read_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) r.fail("bad magic");

  FittedModel model;
  VariationalState& vs = model.state;
  vs.n_users = r.u64();
  vs.n_items = r.u64();
  vs.n_steps = r.u64();
  vs.k = r.u64();
  if (vs.k == 0 || vs.n_steps == 0) r.fail("empty dimensions");
  const std::uint64_t limit = std::uint64_t{1} << 40;
  if (vs.n_users > limit || vs.n_items > limit || vs.n_steps > limit ||
      vs.k > limit) {
    r.fail("implausible dimensions");
  }
  model.hp.k = vs.k;
  model.hp.mu_u = r.f64();
  model.hp.sigma_u = r.f64();
  model.hp.mu_v = r.f64();
  model.hp.sigma_v = r.f64();
  model.hp.mu_ubar = r.f64();
  model.hp.sigma_ubar = r.f64();
  model.hp.mu_vbar = r.f64();
  model.hp.sigma_vbar = r.f64();
  model.user_ids = r.string_array(vs.n_users);
  model.item_ids = r.string_array(vs.n_items);
  const std::size_t dyn_u = vs.n_steps * vs.n_users * vs.k;
  const std::size_t dyn_v = vs.n_steps * vs.n_items * vs.k;
  vs.u_mean = r.f64_array(dyn_u);
  vs.u_log_sd = r.f64_array(dyn_u);
  vs.v_mean = r.f64_array(dyn_v);
  vs.v_log_sd = r.f64_array(dyn_v);
  vs.ubar_mean = r.f64_array(vs.n_users * vs.k);
  vs.ubar_log_sd = r.f64_array(vs.n_users * vs.k);
  vs.vbar_mean = r.f64_array(vs.n_items * vs.k);
  vs.vbar_log_sd = r.f64_array(vs.n_items * vs.k);
  model.elbo_trace = r.f64_array();
  r.expect_eof();
  return model;
}

}  // namespace dpf
