#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "godecf/data.hpp"
#include "godecf/eval.hpp"
#include "godecf/train.hpp"

namespace godecf {

/// Flat key=value experiment description. Defaults follow the reference
/// setup: 128-d embeddings, lr 0.001, Euler, two hops, t1 = 0.9.
struct ExperimentConfig {
  std::string data_path;
  std::string data_format = "raw";  ///< raw | split
  FieldSpec fields;
  int kcore = 5;
  CoreMode kcore_mode = CoreMode::Joint;

  ModelKind model = ModelKind::GodeCF;
  SolverConfig solver;
  int lightgcn_layers = 2;
  Index dims = 128;
  double init_std = 0.1;

  TrainConfig train;
  int threads = 1;

  std::vector<int> eval_n = {10, 20};
  bool exclude_validation_in_test = true;
  std::string checkpoint_format = "text";  ///< text | binary
  std::string output_dir = "runs/default";

  std::string sweep_param;
  std::vector<std::string> sweep_values;

  /// Sets one field from its textual value; throws ConfigError naming the key.
  void set(const std::string& key, const std::string& value);
  /// Canonical "key=value" listing (sorted keys), used as the config echo.
  std::string to_text() const;
  void validate() const;
  /// Output directory, resolved against $GODECF_OUTPUT_ROOT when relative.
  std::filesystem::path resolved_output_dir() const;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies "key=value" overrides on top of `cfg`.
void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& overrides);

std::uint64_t fnv1a64(const std::string& text);

/// Loads the dataset described by the config: either a raw log run through
/// k-core filtering and leave-one-out, or a prepared split directory.
SplitDataset load_dataset(const ExperimentConfig& cfg, std::ostream* log = nullptr);

struct RunSummary {
  std::filesystem::path output_dir;
  MetricsReport test;
  int best_epoch = 0;
  int epochs_run = 0;
  double best_validation_ndcg20 = 0.0;
  double seconds = 0.0;
  bool diverged = false;
};

/// data -> graph -> fit -> test evaluation. Writes config.txt, train_log.csv,
/// metrics.csv, checkpoint/ (e0, hop_weights.txt, meta.txt), summary.txt and
/// manifest.txt into the output directory.
RunSummary run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// Runs one experiment per sweep value into <output>/<param>=<value>/ and
/// consolidates them with emit_sweep_table.
std::vector<RunSummary> run_sweep(const ExperimentConfig& cfg, bool parallel_runs = false,
                                  std::ostream* log = nullptr);

/// Builds <results_dir>/sweep.csv with one row per run directory:
/// "run,param,value,recall20,ndcg20,epochs_to_best,seconds". Directories
/// without a readable summary are skipped with a warning.
std::filesystem::path emit_sweep_table(const std::filesystem::path& results_dir, std::ostream* warnings = nullptr);

/// Restores the best checkpoint of a finished run against its dataset.
Recommender load_checkpoint(const std::filesystem::path& run_dir, const ExperimentConfig& cfg, const SplitDataset& ds);

}  // namespace godecf
