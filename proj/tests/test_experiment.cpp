#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "godecf/experiment.hpp"
#include "godecf/synthetic.hpp"

using namespace godecf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("godecf_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_toy_log(const fs::path& dir) {
  auto path = dir / "ratings.txt";
  std::ofstream out(path);
  for (const auto& r : separable_toy_log().interactions) out << r.user_key << ' ' << r.item_key << ' ' << r.timestamp << '\n';
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig toy_config(const fs::path& dir) {
  ExperimentConfig cfg;
  apply_overrides(cfg, {"data_path=" + write_toy_log(dir).string(), "kcore=1", "dims=8", "lr=0.01",
                        "max_epochs=5", "record_time=false", "output_dir=" + (dir / "run").string()});
  return cfg;
}

}  // namespace

TEST_CASE("config files parse with comments and overrides") {
  std::istringstream in("# base\nsolver = rk4\nt1=0.5\n\nsteps=3  \nuse_weights=true\neval_n=5,20\n");
  auto cfg = parse_config(in);
  CHECK(cfg.solver.method == SolverMethod::RK4);
  CHECK(cfg.solver.t1 == 0.5);
  CHECK(cfg.solver.steps == 3);
  CHECK(cfg.solver.use_weights);
  CHECK(cfg.eval_n == std::vector<int>{5, 20});
  CHECK(cfg.dims == 128);
  CHECK(cfg.train.learning_rate == 0.001);

  apply_overrides(cfg, {"steps=4", "model=lightgcn"});
  CHECK(cfg.solver.steps == 4);
  CHECK(cfg.model == ModelKind::LightGCN);

  std::istringstream echo(cfg.to_text());
  auto again = parse_config(echo);
  CHECK(again.to_text() == cfg.to_text());
}

TEST_CASE("bad configuration names the offending key") {
  ExperimentConfig cfg;
  auto field_of = [&](const std::string& key, const std::string& value) {
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of("no_such_key", "1") == "no_such_key");
  CHECK(field_of("steps", "0") == "steps");
  CHECK(field_of("t1", "abc") == "t1");
  CHECK(field_of("solver", "midpoint") == "solver");
  CHECK(field_of("use_weights", "maybe") == "use_weights");
  CHECK_THROWS_AS(apply_overrides(cfg, {"steps"}), ConfigError);

  ExperimentConfig empty;
  CHECK_THROWS_AS(empty.validate(), ConfigError);
  empty.data_path = "x";
  empty.eval_n = {10};
  CHECK_THROWS_AS(empty.validate(), ConfigError);
}

TEST_CASE("missing dataset is reported with its path") {
  ExperimentConfig cfg;
  cfg.data_path = "/nonexistent/ratings.txt";
  CHECK_THROWS_WITH_AS(load_dataset(cfg), doctest::Contains("/nonexistent/ratings.txt"), DataError);
}

TEST_CASE("a run writes every artifact and reloads its checkpoint") {
  auto dir = scratch("run");
  auto cfg = toy_config(dir);
  auto summary = run_experiment(cfg);
  auto out = dir / "run";
  std::istringstream manifest(slurp(out / "manifest.txt"));
  std::string line;
  int artifacts = 0;
  while (std::getline(manifest, line)) {
    CHECK(fs::file_size(out / line) > 0);
    ++artifacts;
  }
  CHECK(artifacts == 7);
  CHECK(slurp(out / "train_log.csv").rfind("epoch,loss,recall20,ndcg20,seconds\n", 0) == 0);

  auto ds = load_dataset(cfg);
  auto model = load_checkpoint(out, cfg, ds);
  auto report = evaluate(model.final_embeddings(), ds, EvalMode::Test, cfg.eval_n);
  CHECK(report.recall == summary.test.recall);
  CHECK(report.ndcg == summary.test.ndcg);
  fs::remove_all(dir);
}

TEST_CASE("binary checkpoints and prepared splits work too") {
  auto dir = scratch("split");
  auto cfg = toy_config(dir);
  auto ds = load_dataset(cfg);
  write_split(ds, dir / "split");
  apply_overrides(cfg, {"data_format=split", "data_path=" + (dir / "split").string(), "checkpoint_format=binary",
                        "solver=rk4", "use_weights=true"});
  auto summary = run_experiment(cfg);
  CHECK(fs::exists(dir / "run" / "checkpoint" / "e0.bin"));
  auto model = load_checkpoint(dir / "run", cfg, load_dataset(cfg));
  auto report = evaluate(model.final_embeddings(), ds, EvalMode::Test, cfg.eval_n);
  CHECK(report.ndcg == summary.test.ndcg);
  fs::remove_all(dir);
}

TEST_CASE("identical seeds give byte-identical training logs") {
  auto dir = scratch("determinism");
  auto cfg = toy_config(dir);
  run_experiment(cfg);
  auto first = slurp(dir / "run" / "train_log.csv");
  auto first_e0 = slurp(dir / "run" / "checkpoint" / "e0.txt");
  run_experiment(cfg);
  CHECK(slurp(dir / "run" / "train_log.csv") == first);
  CHECK(slurp(dir / "run" / "checkpoint" / "e0.txt") == first_e0);
  fs::remove_all(dir);
}

TEST_CASE("sweeps write one run per value and a consolidated table") {
  auto dir = scratch("sweep");
  auto cfg = toy_config(dir);
  apply_overrides(cfg, {"sweep_param=t1", "sweep_values=0.5,1.0"});
  auto runs = run_sweep(cfg, true);
  CHECK(runs.size() == 2);
  auto csv = slurp(dir / "run" / "sweep.csv");
  std::istringstream in(csv);
  std::string header, a, b, extra;
  std::getline(in, header);
  std::getline(in, a);
  std::getline(in, b);
  CHECK(header == "run,param,value,recall20,ndcg20,epochs_to_best,seconds");
  CHECK(a.rfind("t1=0.5,t1,0.5,", 0) == 0);
  CHECK(b.rfind("t1=1.0,t1,1.0,", 0) == 0);
  CHECK(!std::getline(in, extra));

  // A broken run directory is skipped, not fatal.
  fs::create_directories(dir / "run" / "t1=junk");
  std::ostringstream warnings;
  emit_sweep_table(dir / "run", &warnings);
  CHECK(warnings.str().find("t1=junk") != std::string::npos);
  CHECK(slurp(dir / "run" / "sweep.csv") == csv);

  fs::create_directories(dir / "empty");
  CHECK_THROWS(emit_sweep_table(dir / "empty"));
  fs::remove_all(dir);
}

TEST_CASE("output root comes from the environment for relative paths") {
  ExperimentConfig cfg;
  cfg.output_dir = "runs/x";
  ::setenv("GODECF_OUTPUT_ROOT", "/tmp/root", 1);
  CHECK(cfg.resolved_output_dir() == fs::path("/tmp/root/runs/x"));
  cfg.output_dir = "/abs/x";
  CHECK(cfg.resolved_output_dir() == fs::path("/abs/x"));
  ::unsetenv("GODECF_OUTPUT_ROOT");
  cfg.output_dir = "runs/x";
  CHECK(cfg.resolved_output_dir() == fs::path("runs/x"));
}
