#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "dpf/checkpoint.hpp"
#include "dpf/tensor.hpp"

// End-to-end coverage of the command-line binary: every subcommand is run
// as a child process and judged on exit status, stream contents, and the
// files it leaves behind. DPF_CLI_PATH is injected by the build.

namespace {

namespace fs = std::filesystem;

struct CmdResult {
  int status = -1;
  std::string out;
  std::string err;
};

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() /
                 ("dpf_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CmdResult run_cli(const std::string& args) {
  const fs::path out_file = work_dir() / "stdout.txt";
  const fs::path err_file = work_dir() / "stderr.txt";
  const std::string cmd = std::string(DPF_CLI_PATH) + " " + args + " > " +
                          out_file.string() + " 2> " + err_file.string();
  const int raw = std::system(cmd.c_str());
  CmdResult res;
  res.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  res.out = slurp(out_file);
  res.err = slurp(err_file);
  return res;
}

std::string path_of(const char* name) { return (work_dir() / name).string(); }

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

const char* kSparsePriors =
    "--prior-variance 0.25 --mu-u -0.75 --mu-v -0.75 --mu-ubar -0.75 "
    "--mu-vbar -0.75";

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run_cli("--help").status == 0);
  const auto help = run_cli("--help");
  CHECK(help.out.find("simulate") != std::string::npos);
  CHECK(help.out.find("evaluate") != std::string::npos);

  const auto none = run_cli("");
  CHECK(none.status != 0);
  CHECK(none.err.rfind("error:", 0) == 0);

  const auto bad_flag = run_cli("fit --no-such-flag");
  CHECK(bad_flag.status != 0);
  CHECK(!bad_flag.err.empty());
}

TEST_CASE("simulate, fit, predict, export pipeline") {
  const std::string tensor = path_of("sim.tensor");
  const std::string state = path_of("sim.state");
  const std::string events = path_of("sim.events");
  std::ostringstream sim;
  sim << "simulate --users 12 --items 10 --steps 3 --k 2 " << kSparsePriors
      << " --seed 4 --out " << tensor << " --state " << state << " --events "
      << events;
  const auto simulated = run_cli(sim.str());
  CHECK(simulated.status == 0);
  CHECK(simulated.out.find("simulated 12 users") != std::string::npos);

  const auto loaded = dpf::read_tensor(tensor);
  CHECK(loaded.n_users == 12);
  CHECK(loaded.n_items == 10);
  CHECK(loaded.n_steps == 3);
  REQUIRE(loaded.total_nonzeros() > 0);
  CHECK(fs::exists(state));
  CHECK(count_lines(slurp(events)) >= loaded.total_nonzeros());

  const std::string ckpt = path_of("model.ckpt");
  const std::string trace = path_of("trace.tsv");
  std::ostringstream fit;
  fit << "fit --input " << tensor << " --k 2 " << kSparsePriors
      << " --max-sweeps 4 --tolerance 0 --seed 1 --quiet --out " << ckpt
      << " --trace " << trace;
  const auto fitted = run_cli(fit.str());
  CHECK(fitted.status == 0);
  CHECK(fitted.out.find("fit: 4 sweeps") != std::string::npos);
  CHECK(fitted.err.empty());  // --quiet suppresses progress

  const auto model = dpf::read_checkpoint(ckpt);
  CHECK(model.hp.k == 2);
  CHECK(model.state.n_steps == 3);
  CHECK(model.elbo_trace.size() == 4);
  CHECK(model.user_ids == loaded.user_ids);
  const auto trace_text = slurp(trace);
  CHECK(trace_text.rfind("sweep\telbo\n", 0) == 0);
  CHECK(count_lines(trace_text) == 5);

  std::ostringstream pred;
  pred << "predict --model " << ckpt << " --user u000003 --top 5";
  const auto ranked = run_cli(pred.str());
  CHECK(ranked.status == 0);
  CHECK(ranked.out.rfind("rank\titem\tscore\n", 0) == 0);
  CHECK(count_lines(ranked.out) == 6);

  const std::string pred10 =
      "predict --model " + ckpt + " --user u000003 --top 10";
  const auto fewer = run_cli(pred10 + " --input " + tensor);
  CHECK(fewer.status == 0);
  CHECK(count_lines(fewer.out) <= count_lines(run_cli(pred10).out));

  const auto missing_user = run_cli("predict --model " + ckpt +
                                    " --user nobody --top 3");
  CHECK(missing_user.status != 0);
  CHECK(missing_user.err.rfind("error:", 0) == 0);

  const std::string traj = path_of("traj.tsv");
  const auto exported = run_cli("export-trajectories --model " + ckpt +
                                " --users u000001 --out " + traj);
  CHECK(exported.status == 0);
  const auto traj_text = slurp(traj);
  CHECK(traj_text.rfind("kind\tid\tfactor\tstep\texpression\n", 0) == 0);
  CHECK(count_lines(traj_text) == 1 + 2 * 3);  // one user, K=2, T=3

  const std::string glob = path_of("glob.tsv");
  CHECK(run_cli("export-global --model " + ckpt + " --out " + glob).status ==
        0);
  CHECK(count_lines(slurp(glob)) == 1 + (12 + 10) * 2);

  const std::string agg = path_of("agg.tsv");
  CHECK(run_cli("export-aggregate --model " + ckpt + " --normalize --out " +
                agg)
            .status == 0);
  CHECK(count_lines(slurp(agg)) == 1 + 3);
}

TEST_CASE("evaluate writes a fold report") {
  const std::string tensor = path_of("eval.tensor");
  std::ostringstream sim;
  sim << "simulate --users 14 --items 12 --steps 3 --k 2 " << kSparsePriors
      << " --seed 9 --out " << tensor;
  REQUIRE(run_cli(sim.str()).status == 0);

  const std::string report = path_of("report.tsv");
  std::ostringstream eval;
  eval << "evaluate --input " << tensor << " --k 2 " << kSparsePriors
       << " --max-sweeps 3 --seed 2 --models dpf --models pf-last --cutoff 10"
       << " --out " << report;
  const auto evaluated = run_cli(eval.str());
  CHECK(evaluated.status == 0);
  CHECK(evaluated.out.find("recall@10") != std::string::npos);
  CHECK(evaluated.out.find("dPF") != std::string::npos);
  CHECK(evaluated.out.find("PF-last") != std::string::npos);
  const auto text = slurp(report);
  CHECK(text.find("dPF\tmean") != std::string::npos);
  CHECK(text.find("PF-last\tmean") != std::string::npos);
}

TEST_CASE("events input with bucketing matches tensor input") {
  const std::string events = path_of("in.events");
  {
    std::ofstream out(events);
    out << "user\titem\ttimestamp\tcount\n";
    out << "a\tx\t0\t2\n";
    out << "a\ty\t100\t1\n";
    out << "b\tx\t150\t1\n";
    out << "b\ty\t40\t3\n";
  }
  const std::string ckpt = path_of("events.ckpt");
  std::ostringstream fit;
  fit << "fit --events " << events << " --granularity 100 --k 2 "
      << kSparsePriors << " --max-sweeps 2 --tolerance 0 --quiet --out "
      << ckpt;
  const auto fitted = run_cli(fit.str());
  CHECK(fitted.status == 0);
  const auto model = dpf::read_checkpoint(ckpt);
  CHECK(model.state.n_users == 2);
  CHECK(model.state.n_items == 2);
  CHECK(model.state.n_steps == 2);

  const auto both = run_cli("fit --events " + events + " --input " + events +
                            " --granularity 100 --k 2 --out " + ckpt);
  CHECK(both.status != 0);
  CHECK(both.err.rfind("error:", 0) == 0);
}

TEST_CASE("config files override flags") {
  const std::string tensor = path_of("cfg.tensor");
  std::ostringstream sim;
  sim << "simulate --users 6 --items 5 --steps 2 --k 2 " << kSparsePriors
      << " --seed 3 --out " << tensor;
  REQUIRE(run_cli(sim.str()).status == 0);

  const std::string cfg = path_of("fit.cfg");
  {
    std::ofstream out(cfg);
    out << "# tuned settings\n";
    out << "k = 3\n";
    out << "max-sweeps = 2\n";
  }
  const std::string ckpt = path_of("cfg.ckpt");
  std::ostringstream fit;
  fit << "fit --input " << tensor << " --k 2 " << kSparsePriors
      << " --max-sweeps 7 --tolerance 0 --quiet --config " << cfg
      << " --out " << ckpt;
  const auto fitted = run_cli(fit.str());
  CHECK(fitted.status == 0);
  const auto model = dpf::read_checkpoint(ckpt);
  CHECK(model.hp.k == 3);           // config wins over --k 2
  CHECK(model.elbo_trace.size() == 2);

  {
    std::ofstream out(cfg);
    out << "no_such_setting = 1\n";
  }
  const auto rejected = run_cli(fit.str());
  CHECK(rejected.status != 0);
  CHECK(rejected.err.rfind("error:", 0) == 0);
  CHECK(rejected.err.find("no_such_setting") != std::string::npos);
}

TEST_CASE("fit refuses invalid hyperparameters") {
  const auto res = run_cli("fit --input nowhere.tensor --k 0 --out x.ckpt");
  CHECK(res.status != 0);
  CHECK(res.err.rfind("error:", 0) == 0);
}
