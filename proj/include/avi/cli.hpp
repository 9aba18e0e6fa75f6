#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "avi/models/enumerate.hpp"
#include "avi/models/lda.hpp"
#include "avi/optimize.hpp"

namespace avi::cli {

// Fully resolved experiment description: one optimization run per
// (algorithm, seed) pair, byte-reproducible outputs.
struct RunSpec {
  std::string model = "qmr";
  std::string model_file;  // empty: built-in desk-scale instance
  std::vector<std::string> algorithms = {"sgd"};
  std::string outer = "steepest";
  double stepsize = 0.05;
  int rollouts = 10;
  int iterations = 500;
  int elbo_eval_samples = 100;
  std::vector<uint64_t> seeds = {0};
  std::string out_dir = "runs";
  double ridge = 1e-3;
  int restart_period = 20;
  std::string init_store;  // optional snapshot to resume from
  bool timings = false;    // write measured wallclock (not byte-reproducible)
};

inline void write_history(const std::vector<IterationRecord>& records,
                          const std::string& path) {
  if (records.empty()) throw ParameterError("write_history: no records");
  std::ofstream os(path);
  if (!os) throw IoError("cannot write history: " + path);
  os << "iteration,cumulative_samples,elbo_mean,elbo_stderr,direction_norm,wallclock_s\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%d,%lld,%.17g,%.17g,%.17g,%.17g\n", r.iteration,
                  r.cumulative_samples, r.elbo_mean, r.elbo_stderr, r.direction_norm,
                  r.wallclock_s);
    os << buf;
  }
  if (!os) throw IoError("write failed: " + path);
}

namespace detail {

inline Program make_program(const RunSpec& spec) {
  if (spec.model == "qmr") {
    const models::QmrModel m = spec.model_file.empty()
                                   ? models::make_desk_qmr()
                                   : models::load_qmr_file(spec.model_file);
    return models::qmr_program(m);
  }
  if (spec.model == "lda") {
    const models::LdaModel m = spec.model_file.empty()
                                   ? models::make_desk_lda()
                                   : models::load_lda_file(spec.model_file);
    return models::lda_program(m);
  }
  if (spec.model == "fig1") return models::branching_program();
  if (spec.model == "two-coin") return models::two_coin_program();
  if (spec.model == "gaussian-pair") return models::gaussian_pair_program();
  throw ParameterError("unknown model: " + spec.model);
}

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "sgd") return Algorithm::Sgd;
  if (s == "enac") return Algorithm::Enac;
  if (s == "sogd") return Algorithm::Sogd;
  throw ParameterError("unknown algorithm: " + s);
}

inline void write_manifest(const RunSpec& spec, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write manifest: " + path);
  char buf[64];
  auto real = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  os << "model=" << spec.model << '\n';
  os << "model_file=" << (spec.model_file.empty() ? "<builtin>" : spec.model_file)
     << '\n';
  os << "algorithms=";
  for (size_t i = 0; i < spec.algorithms.size(); ++i)
    os << (i ? " " : "") << spec.algorithms[i];
  os << '\n';
  os << "outer=" << spec.outer << '\n';
  os << "stepsize=" << real(spec.stepsize) << '\n';
  os << "rollouts=" << spec.rollouts << '\n';
  os << "iterations=" << spec.iterations << '\n';
  os << "elbo_eval_samples=" << spec.elbo_eval_samples << '\n';
  os << "seeds=";
  for (size_t i = 0; i < spec.seeds.size(); ++i) os << (i ? " " : "") << spec.seeds[i];
  os << '\n';
  os << "out=" << spec.out_dir << '\n';
  os << "ridge=" << real(spec.ridge) << '\n';
  os << "restart_period=" << spec.restart_period << '\n';
  os << "init_store=" << (spec.init_store.empty() ? "<none>" : spec.init_store) << '\n';
  os << "timings=" << (spec.timings ? 1 : 0) << '\n';
}

}  // namespace detail

// Executes the spec: per (algorithm, seed), one optimization run, one CSV
// history and one final store snapshot; plus a manifest with every resolved
// setting.
inline int execute(const RunSpec& spec) {
  namespace fs = std::filesystem;
  const Program program = detail::make_program(spec);
  fs::create_directories(spec.out_dir);
  detail::write_manifest(spec, (fs::path(spec.out_dir) / "manifest.txt").string());

  for (const std::string& algo_name : spec.algorithms) {
    for (uint64_t seed : spec.seeds) {
      OptimizerConfig config;
      config.algorithm = detail::parse_algorithm(algo_name);
      config.outer = spec.outer == "cg" ? Outer::ConjugateGradient : Outer::Steepest;
      config.stepsize = spec.stepsize;
      config.rollouts = spec.rollouts;
      config.iterations = spec.iterations;
      config.elbo_eval_samples = spec.elbo_eval_samples;
      config.seed = seed;
      config.ridge = spec.ridge;
      config.restart_period = spec.restart_period;

      ParamStore store = spec.init_store.empty() ? ParamStore()
                                                 : ParamStore::load_file(spec.init_store);
      std::vector<IterationRecord> history = run_optimization(program, store, config);
      if (int(history.size()) != config.iterations + 1)
        std::cerr << "warning: run aborted after " << history.size() - 1
                  << " iterations (numerical failure in direction)\n";
      if (!spec.timings)
        for (auto& r : history) r.wallclock_s = 0.0;

      const std::string stem = spec.model + "_" + algo_name + "_" + spec.outer +
                               "_seed" + std::to_string(seed);
      const fs::path csv = fs::path(spec.out_dir) / (stem + ".csv");
      write_history(history, csv.string());
      store.save_file((fs::path(spec.out_dir) / (stem + "_store.txt")).string());
      std::cout << stem << ": iterations=" << history.size() - 1
                << " final_elbo=" << history.back().elbo_mean << '\n';
    }
  }
  return 0;
}

inline int run(int argc, const char* const* argv) {
  RunSpec spec;
  if (const char* env_out = std::getenv("AVI_OUT")) spec.out_dir = env_out;

  CLI::App app{"Variational inference for trace-based probabilistic programs"};
  app.set_config("--config", "", "key=value file; command-line flags override");
  app.add_option("--model", spec.model, "Model: qmr | lda | fig1 | two-coin | gaussian-pair")
      ->check(CLI::IsMember({"qmr", "lda", "fig1", "two-coin", "gaussian-pair"}));
  app.add_option("--model-file", spec.model_file,
                 "Model description file (default: built-in desk-scale instance)");
  app.add_option("--algo", spec.algorithms, "Gradient estimator(s): sgd | enac | sogd")
      ->check(CLI::IsMember({"sgd", "enac", "sogd"}));
  app.add_option("--outer", spec.outer, "Outer optimizer: steepest | cg")
      ->check(CLI::IsMember({"steepest", "cg"}));
  app.add_option("--stepsize", spec.stepsize, "Stepsize applied to the unit-norm direction")
      ->check(CLI::PositiveNumber);
  app.add_option("--rollouts", spec.rollouts, "Guided traces per gradient estimate")
      ->check(CLI::PositiveNumber);
  app.add_option("--iters", spec.iterations, "Optimization iterations")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--elbo-samples", spec.elbo_eval_samples,
                 "Samples per lower-bound evaluation")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed,--seeds", spec.seeds, "Random seed(s), one run per seed");
  app.add_option("--out", spec.out_dir, "Output directory (env AVI_OUT overrides default)");
  app.add_option("--ridge", spec.ridge, "Ridge regularization for ENAC/SOGD")
      ->check(CLI::PositiveNumber);
  app.add_option("--restart-period", spec.restart_period,
                 "Conjugate-gradient forced restart period")
      ->check(CLI::PositiveNumber);
  app.add_option("--init-store", spec.init_store, "Store snapshot to resume from");
  app.add_flag("--timings", spec.timings,
               "Record measured wallclock in CSVs (breaks byte-reproducibility)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage error
  }

  if (spec.seeds.empty()) {
    std::cerr << "error: need at least one seed\n";
    return 2;
  }

  try {
    return execute(spec);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace avi::cli
