// Command-line front end: prepare-data, train, evaluate, sweep, sweep-table, gradcheck.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "godecf/experiment.hpp"
#include "godecf/gradcheck.hpp"
#include "godecf/graph.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

godecf::ExperimentConfig config_from(const std::string& path, const std::vector<std::string>& overrides) {
  godecf::ExperimentConfig cfg = path.empty() ? godecf::ExperimentConfig{} : godecf::load_config(path);
  godecf::apply_overrides(cfg, overrides);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph ODE collaborative filtering: data preparation, training, evaluation and sweeps"};
  app.require_subcommand(1);

  // prepare-data
  auto* prepare = app.add_subcommand("prepare-data", "k-core filter a raw log and write the leave-one-out split");
  std::string input, split_dir, columns = "0,1,2", delimiter = "whitespace", core_mode = "joint", adjacency_dump;
  int kcore = 5;
  prepare->add_option("--input", input, "raw interaction file (user item timestamp)")->required();
  prepare->add_option("--out", split_dir, "output directory for the split")->required();
  prepare->add_option("--kcore", kcore, "minimum interactions per user/item")->capture_default_str();
  prepare->add_option("--kcore-mode", core_mode, "joint or user")->capture_default_str();
  prepare->add_option("--columns", columns, "zero-based user,item,timestamp columns")->capture_default_str();
  prepare->add_option("--delimiter", delimiter, "whitespace, tab, comma or one character")->capture_default_str();
  prepare->add_option("--dump-adjacency", adjacency_dump, "write the normalized adjacency as 'row col value'");

  // train
  auto* train = app.add_subcommand("train", "train one model and write metrics and checkpoints");
  std::string config_path;
  std::vector<std::string> overrides;
  bool quiet = false;
  train->add_option("--config", config_path, "key=value configuration file");
  train->add_option("--set", overrides, "override a configuration key (key=value)");
  train->add_flag("--quiet", quiet, "suppress progress output");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "evaluate the best checkpoint of a finished run");
  std::string run_dir, mode = "test";
  std::vector<std::string> eval_overrides;
  eval->add_option("--run", run_dir, "run output directory")->required();
  eval->add_option("--mode", mode, "test or validation")->capture_default_str();
  eval->add_option("--set", eval_overrides, "override a key from the run's config.txt");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run one experiment per value of a parameter");
  std::string sweep_config, sweep_param, sweep_values;
  std::vector<std::string> sweep_overrides;
  bool parallel_runs = false;
  sweep->add_option("--config", sweep_config, "base configuration file");
  sweep->add_option("--param", sweep_param, "configuration key to sweep");
  sweep->add_option("--values", sweep_values, "comma-separated values");
  sweep->add_option("--set", sweep_overrides, "override a configuration key (key=value)");
  sweep->add_flag("--parallel-runs", parallel_runs, "run sweep points concurrently");

  // sweep-table
  auto* table = app.add_subcommand("sweep-table", "consolidate finished runs into sweep.csv");
  std::string results_dir;
  table->add_option("--dir", results_dir, "directory holding one subdirectory per run")->required();

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
  std::uint64_t seed = 7;
  godecf::Index users = 6, items = 8, dims = 4;
  int steps = 2;
  double tolerance = 1e-5;
  gradcheck->add_option("--seed", seed)->capture_default_str();
  gradcheck->add_option("--users", users)->capture_default_str();
  gradcheck->add_option("--items", items)->capture_default_str();
  gradcheck->add_option("--dims", dims)->capture_default_str();
  gradcheck->add_option("--steps", steps)->capture_default_str();
  gradcheck->add_option("--tolerance", tolerance)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*prepare) {
      godecf::ExperimentConfig cfg;
      cfg.set("kcore", std::to_string(kcore));
      cfg.set("kcore_mode", core_mode);
      cfg.set("delimiter", delimiter);
      auto cols = CLI::detail::split(columns, ',');
      if (cols.size() != 3) throw godecf::ConfigError("columns", "expected three comma-separated indices");
      cfg.set("user_column", cols[0]);
      cfg.set("item_column", cols[1]);
      cfg.set("timestamp_column", cols[2]);
      cfg.data_path = input;
      const auto ds = godecf::load_dataset(cfg, &std::cerr);
      godecf::write_split(ds, split_dir);
      std::cout << "users=" << ds.n_users << " items=" << ds.n_items << " train=" << ds.train_size()
                << " validation=" << ds.validation.size() << " test=" << ds.test.size() << "\n";
      if (!adjacency_dump.empty()) {
        std::ofstream out(adjacency_dump);
        godecf::write_adjacency_coo(out, godecf::build_adjacency<double>(ds));
      }
    } else if (*train) {
      auto cfg = config_from(config_path, overrides);
      auto summary = godecf::run_experiment(cfg, quiet ? nullptr : &std::cerr);
      godecf::write_metrics_csv(std::cout, godecf::EvalMode::Test, summary.test);
      if (summary.diverged) {
        std::cerr << "training diverged; kept the last good checkpoint\n";
        return kExitRuntime;
      }
    } else if (*eval) {
      auto cfg = godecf::load_config(std::filesystem::path(run_dir) / "config.txt");
      godecf::apply_overrides(cfg, eval_overrides);
      godecf::EvalMode eval_mode;
      if (mode == "test") eval_mode = godecf::EvalMode::Test;
      else if (mode == "validation") eval_mode = godecf::EvalMode::Validation;
      else throw godecf::ConfigError("mode", "expected test or validation");
      const auto ds = godecf::load_dataset(cfg);
      const auto model = godecf::load_checkpoint(run_dir, cfg, ds);
      const auto report = godecf::evaluate(model.final_embeddings(), ds, eval_mode, cfg.eval_n,
                                           {.exclude_validation_in_test = cfg.exclude_validation_in_test,
                                            .threads = cfg.threads});
      godecf::write_metrics_csv(std::cout, eval_mode, report);
    } else if (*sweep) {
      auto cfg = config_from(sweep_config, sweep_overrides);
      if (!sweep_param.empty()) cfg.set("sweep_param", sweep_param);
      if (!sweep_values.empty()) cfg.set("sweep_values", sweep_values);
      godecf::run_sweep(cfg, parallel_runs, &std::cerr);
      std::ifstream csv(cfg.resolved_output_dir() / "sweep.csv");
      std::cout << csv.rdbuf();
    } else if (*table) {
      auto path = godecf::emit_sweep_table(results_dir, &std::cerr);
      std::ifstream csv(path);
      std::cout << csv.rdbuf();
    } else if (*gradcheck) {
      auto reports = godecf::gradient_check_suite(seed, users, items, dims, steps);
      double worst = 0.0;
      for (const auto& r : reports) {
        std::printf("%-5s n_hops=%d weights=%-3s coords=%zu max_rel_error=%.3e\n",
                    godecf::to_string(r.solver.method).c_str(), r.solver.n_hops,
                    r.solver.use_weights ? "on" : "off", r.coordinates, r.max_relative_error);
        worst = std::max(worst, r.max_relative_error);
      }
      std::printf("max relative error %.3e (tolerance %.1e)\n", worst, tolerance);
      if (!(worst < tolerance)) return kExitRuntime;
    }
  } catch (const godecf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
