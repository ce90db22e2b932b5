#include "dpf/export_tables.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <unordered_map>

namespace dpf {
namespace {

std::vector<std::size_t> resolve(const std::vector<std::string>& wanted,
                                 const std::vector<std::string>& ids,
                                 const char* kind, bool default_all) {
  std::vector<std::size_t> out;
  if (wanted.empty()) {
    if (default_all) {
      out.resize(ids.size());
      for (std::size_t i = 0; i < ids.size(); ++i) out[i] = i;
    }
    return out;
  }
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);
  for (const std::string& id : wanted) {
    auto it = index.find(id);
    if (it == index.end()) {
      throw std::invalid_argument(std::string("unknown ") + kind + " id '" +
                                  id + "'");
    }
    out.push_back(it->second);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct Selected {
  std::vector<std::size_t> users;
  std::vector<std::size_t> items;
};

Selected resolve_selection(const FittedModel& model,
                           const EntitySelection& entities) {
  const bool all = entities.users.empty() && entities.items.empty();
  Selected sel;
  sel.users = resolve(entities.users, model.user_ids, "user", all);
  sel.items = resolve(entities.items, model.item_ids, "item", all);
  return sel;
}

class TsvFile {
 public:
  explicit TsvFile(const std::string& path)
      : path_(path), f_(std::fopen(path.c_str(), "w")) {
    if (!f_) throw std::runtime_error("cannot open " + path + " for write");
  }
  ~TsvFile() {
    if (f_) std::fclose(f_);
  }
  TsvFile(const TsvFile&) = delete;
  TsvFile& operator=(const TsvFile&) = delete;

  void text(const char* s) { std::fputs(s, f_); }
  template <typename... Args>
  void line(const char* fmt, Args... args) {
    std::fprintf(f_, fmt, args...);
  }
  void close() {
    if (std::fclose(f_) != 0) {
      f_ = nullptr;
      throw std::runtime_error("write failed: " + path_);
    }
    f_ = nullptr;
  }

 private:
  std::string path_;
  std::FILE* f_;
};

}  // namespace

void export_trajectories(const FittedModel& model,
                         const EntitySelection& entities,
                         const std::string& path) {
  const VariationalState& vs = model.state;
  const Selected sel = resolve_selection(model, entities);
  TsvFile out(path);
  out.text("kind\tid\tfactor\tstep\texpression\n");
  for (std::size_t n : sel.users) {
    for (std::size_t kk = 0; kk < vs.k; ++kk) {
      for (std::size_t t = 0; t < vs.n_steps; ++t) {
        const double value = vs.u_mean[(t * vs.n_users + n) * vs.k + kk] +
                             vs.ubar_mean[n * vs.k + kk];
        out.line("user\t%s\t%zu\t%zu\t%.17g\n", model.user_ids[n].c_str(), kk,
                 t, value);
      }
    }
  }
  for (std::size_t m : sel.items) {
    for (std::size_t kk = 0; kk < vs.k; ++kk) {
      for (std::size_t t = 0; t < vs.n_steps; ++t) {
        const double value = vs.v_mean[(t * vs.n_items + m) * vs.k + kk] +
                             vs.vbar_mean[m * vs.k + kk];
        out.line("item\t%s\t%zu\t%zu\t%.17g\n", model.item_ids[m].c_str(), kk,
                 t, value);
      }
    }
  }
  out.close();
}

void export_global_factors(const FittedModel& model,
                           const EntitySelection& entities,
                           const std::string& path) {
  const VariationalState& vs = model.state;
  const Selected sel = resolve_selection(model, entities);
  TsvFile out(path);
  out.text("kind\tid\tfactor\tvalue\n");
  for (std::size_t n : sel.users) {
    for (std::size_t kk = 0; kk < vs.k; ++kk) {
      out.line("user\t%s\t%zu\t%.17g\n", model.user_ids[n].c_str(), kk,
               vs.ubar_mean[n * vs.k + kk]);
    }
  }
  for (std::size_t m : sel.items) {
    for (std::size_t kk = 0; kk < vs.k; ++kk) {
      out.line("item\t%s\t%zu\t%.17g\n", model.item_ids[m].c_str(), kk,
               vs.vbar_mean[m * vs.k + kk]);
    }
  }
  out.close();
}

void export_aggregate_factors(const FittedModel& model,
                              const std::string& path, bool raw,
                              bool normalize) {
  const VariationalState& vs = model.state;
  const std::size_t N = vs.n_users;
  const std::size_t K = vs.k;
  if (N == 0) throw std::invalid_argument("aggregate export: no users");

  TsvFile out(path);
  out.text("step");
  for (std::size_t kk = 0; kk < K; ++kk) out.line("\tfactor_%zu", kk);
  out.text("\n");

  std::vector<double> row(K);
  for (std::size_t t = 0; t < vs.n_steps; ++t) {
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t kk = 0; kk < K; ++kk) {
        const std::size_t dyn = (t * N + n) * K + kk;
        const std::size_t glob = n * K + kk;
        if (raw) {
          row[kk] += vs.u_mean[dyn] + vs.ubar_mean[glob];
        } else {
          const double dyn_var = std::exp(2.0 * vs.u_log_sd[dyn]);
          const double glob_var = std::exp(2.0 * vs.ubar_log_sd[glob]);
          row[kk] += std::exp(vs.u_mean[dyn] + 0.5 * dyn_var +
                              vs.ubar_mean[glob] + 0.5 * glob_var);
        }
      }
    }
    for (double& v : row) v /= static_cast<double>(N);
    if (normalize) {
      double total = 0.0;
      for (double v : row) total += v;
      if (total == 0.0) {
        throw std::runtime_error("aggregate export: zero step total, cannot normalize");
      }
      for (double& v : row) v /= total;
    }
    out.line("%zu", t);
    for (double v : row) out.line("\t%.17g", v);
    out.text("\n");
  }
  out.close();
}

}  // namespace dpf
