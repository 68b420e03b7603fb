#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "caloron/runner.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

caloron::RunConfig load_config(const std::string& path) {
  std::string text = slurp(path);
  std::string base = std::filesystem::path(path).parent_path().string();
  return caloron::parse_run_config(text, base.empty() ? "." : base);
}

void apply_threads_env() {
#ifdef _OPENMP
  if (const char* s = std::getenv("CALORON_THREADS")) {
    int n = std::atoi(s);
    if (n > 0) omp_set_num_threads(n);
  }
#endif
}

}  // namespace

int main(int argc, char** argv) {
  apply_threads_env();

  CLI::App app{"heat-flow construction of periodic anti-self-dual fields"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, format = "csv", out_path = "export.csv";
  double mu = 1.0;
  std::vector<std::string> sweep_paths;
  // Scalar overrides; config file remains the primary interface.
  double opt_tol_b = -1.0, opt_tmax = -1.0;
  long opt_seed = -1;
  std::string opt_outdir;

  auto add_overrides = [&](CLI::App* c) {
    c->add_option("--tol-b", opt_tol_b, "override flow.tol_b");
    c->add_option("--t-max", opt_tmax, "override flow.t_max");
    c->add_option("--seed", opt_seed, "override seed");
    c->add_option("--output-dir", opt_outdir, "override output directory");
  };

  CLI::App* run = app.add_subcommand("run", "flow to convergence and write reports");
  run->add_option("config", config_path, "run-config JSON")->required();
  add_overrides(run);

  CLI::App* verify = app.add_subcommand("verify", "invariant suite on the configured instance");
  verify->add_option("config", config_path, "run-config JSON")->required();
  add_overrides(verify);

  CLI::App* exp = app.add_subcommand("export", "convert a checkpoint to csv/json/vtk");
  exp->add_option("checkpoint", ckpt_path, "checkpoint file")->required();
  exp->add_option("--format", format, "csv, json, or vtk");
  exp->add_option("--out", out_path, "output file");
  exp->add_option("--mu", mu, "circle parameter for caloron coordinates");

  CLI::App* sweep = app.add_subcommand("sweep", "run several configs in sequence");
  sweep->add_option("configs", sweep_paths, "run-config JSON files")->required();

  CLI11_PARSE(app, argc, argv);

  auto with_overrides = [&](caloron::RunConfig cfg) {
    if (opt_tol_b > 0.0) cfg.flow.tol_b = opt_tol_b;
    if (opt_tmax > 0.0) cfg.flow.t_max = opt_tmax;
    if (opt_seed >= 0) cfg.seed = static_cast<std::uint64_t>(opt_seed);
    if (!opt_outdir.empty()) cfg.output_dir = opt_outdir;
    return cfg;
  };

  try {
    if (run->parsed()) return caloron::cmd_run(with_overrides(load_config(config_path)));
    if (verify->parsed()) return caloron::cmd_verify(with_overrides(load_config(config_path)));
    if (exp->parsed()) return caloron::cmd_export(ckpt_path, format, out_path, mu);
    if (sweep->parsed()) {
      int worst = 0;
      for (const auto& p : sweep_paths) {
        int rc;
        try {
          rc = caloron::cmd_run(with_overrides(load_config(p)));
        } catch (const std::exception& ex) {
          std::fprintf(stderr, "%s: %s\n", p.c_str(), ex.what());
          rc = 1;
        }
        std::printf("%s exit=%d\n", p.c_str(), rc);
        worst = std::max(worst, rc);
      }
      return worst;
    }
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 1;
}
