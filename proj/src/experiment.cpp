#include "godecf/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <sstream>

namespace godecf {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string piece;
  while (std::getline(in, piece, ',')) {
    piece = trim(piece);
    if (!piece.empty()) out.push_back(piece);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "cannot parse '" + value + "' as a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError(key, "expected true/false, got '" + value + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string delimiter_name(char d) {
  switch (d) {
    case '\0': return "whitespace";
    case '\t': return "tab";
    case ',': return "comma";
    default: return std::string(1, d);
  }
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t k = 0; k < parts.size(); ++k) out += (k ? "," : "") + parts[k];
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::map<std::string, std::string> values;
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return values;
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  auto positive_int = [&](int& field) {
    field = parse_number<int>(key, value);
    if (field < 1) throw ConfigError(key, "must be >= 1");
  };
  try {
    if (key == "data_path") {
      data_path = value;
    } else if (key == "data_format") {
      if (value != "raw" && value != "split") throw ConfigError(key, "expected raw or split");
      data_format = value;
    } else if (key == "user_column") {
      fields.user_column = parse_number<int>(key, value);
    } else if (key == "item_column") {
      fields.item_column = parse_number<int>(key, value);
    } else if (key == "timestamp_column") {
      fields.timestamp_column = parse_number<int>(key, value);
    } else if (key == "delimiter") {
      if (value == "whitespace" || value.empty()) fields.delimiter = '\0';
      else if (value == "tab") fields.delimiter = '\t';
      else if (value == "comma") fields.delimiter = ',';
      else if (value.size() == 1) fields.delimiter = value[0];
      else throw ConfigError(key, "expected whitespace, tab, comma or a single character");
    } else if (key == "kcore") {
      positive_int(kcore);
    } else if (key == "kcore_mode") {
      if (value == "joint") kcore_mode = CoreMode::Joint;
      else if (value == "user") kcore_mode = CoreMode::UserOnly;
      else throw ConfigError(key, "expected joint or user");
    } else if (key == "model") {
      if (value == "gode_cf") model = ModelKind::GodeCF;
      else if (value == "lightgcn") model = ModelKind::LightGCN;
      else throw ConfigError(key, "expected gode_cf or lightgcn");
    } else if (key == "solver") {
      try {
        solver.method = parse_solver_method(value);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(key, e.what());
      }
    } else if (key == "t1") {
      solver.t1 = parse_number<double>(key, value);
      if (!(solver.t1 > 0.0) || !std::isfinite(solver.t1)) throw ConfigError(key, "must be finite and > 0");
    } else if (key == "steps") {
      positive_int(solver.steps);
    } else if (key == "n_hops") {
      positive_int(solver.n_hops);
    } else if (key == "use_weights") {
      solver.use_weights = parse_bool(key, value);
    } else if (key == "lightgcn_layers") {
      lightgcn_layers = parse_number<int>(key, value);
      if (lightgcn_layers < 0) throw ConfigError(key, "must be >= 0");
    } else if (key == "dims") {
      dims = parse_number<Index>(key, value);
      if (dims < 1) throw ConfigError(key, "must be >= 1");
    } else if (key == "init_std") {
      init_std = parse_number<double>(key, value);
      if (!(init_std > 0.0)) throw ConfigError(key, "must be > 0");
    } else if (key == "lr") {
      train.learning_rate = parse_number<double>(key, value);
      if (!(train.learning_rate > 0.0)) throw ConfigError(key, "must be > 0");
    } else if (key == "l2") {
      train.l2_lambda = parse_number<double>(key, value);
      if (!(train.l2_lambda >= 0.0)) throw ConfigError(key, "must be >= 0");
    } else if (key == "batch_size") {
      train.batch_size = parse_number<std::size_t>(key, value);
      if (train.batch_size < 1) throw ConfigError(key, "must be >= 1");
    } else if (key == "max_epochs") {
      train.max_epochs = parse_number<int>(key, value);
      if (train.max_epochs < 0) throw ConfigError(key, "must be >= 0");
    } else if (key == "patience") {
      positive_int(train.patience);
    } else if (key == "seed") {
      train.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "eval_every") {
      positive_int(train.eval_every);
    } else if (key == "record_time") {
      train.record_time = parse_bool(key, value);
    } else if (key == "threads") {
      positive_int(threads);
    } else if (key == "eval_n") {
      eval_n.clear();
      for (const auto& piece : split_list(value)) {
        int n = parse_number<int>(key, piece);
        if (n < 1) throw ConfigError(key, "cutoffs must be >= 1");
        eval_n.push_back(n);
      }
      if (eval_n.empty()) throw ConfigError(key, "needs at least one cutoff");
    } else if (key == "exclude_validation_in_test") {
      exclude_validation_in_test = parse_bool(key, value);
    } else if (key == "checkpoint_format") {
      if (value != "text" && value != "binary") throw ConfigError(key, "expected text or binary");
      checkpoint_format = value;
    } else if (key == "output_dir") {
      if (value.empty()) throw ConfigError(key, "must not be empty");
      output_dir = value;
    } else if (key == "sweep_param") {
      if (value == "sweep_param" || value == "sweep_values" || value == "output_dir") {
        throw ConfigError(key, "cannot sweep over '" + value + "'");
      }
      sweep_param = value;
    } else if (key == "sweep_values") {
      sweep_values = split_list(value);
    } else {
      throw ConfigError(key, "unknown configuration key");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

std::string ExperimentConfig::to_text() const {
  std::vector<int> cutoffs = eval_n;
  std::vector<std::string> n_text;
  for (int n : cutoffs) n_text.push_back(std::to_string(n));
  std::map<std::string, std::string> kv{
      {"data_path", data_path},
      {"data_format", data_format},
      {"user_column", std::to_string(fields.user_column)},
      {"item_column", std::to_string(fields.item_column)},
      {"timestamp_column", std::to_string(fields.timestamp_column)},
      {"delimiter", delimiter_name(fields.delimiter)},
      {"kcore", std::to_string(kcore)},
      {"kcore_mode", kcore_mode == CoreMode::Joint ? "joint" : "user"},
      {"model", to_string(model)},
      {"solver", to_string(solver.method)},
      {"t1", format_double(solver.t1)},
      {"steps", std::to_string(solver.steps)},
      {"n_hops", std::to_string(solver.n_hops)},
      {"use_weights", solver.use_weights ? "true" : "false"},
      {"lightgcn_layers", std::to_string(lightgcn_layers)},
      {"dims", std::to_string(dims)},
      {"init_std", format_double(init_std)},
      {"lr", format_double(train.learning_rate)},
      {"l2", format_double(train.l2_lambda)},
      {"batch_size", std::to_string(train.batch_size)},
      {"max_epochs", std::to_string(train.max_epochs)},
      {"patience", std::to_string(train.patience)},
      {"seed", std::to_string(train.seed)},
      {"eval_every", std::to_string(train.eval_every)},
      {"record_time", train.record_time ? "true" : "false"},
      {"threads", std::to_string(threads)},
      {"eval_n", join(n_text)},
      {"exclude_validation_in_test", exclude_validation_in_test ? "true" : "false"},
      {"checkpoint_format", checkpoint_format},
      {"output_dir", output_dir},
      {"sweep_param", sweep_param},
      {"sweep_values", join(sweep_values)},
  };
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

void ExperimentConfig::validate() const {
  if (data_path.empty()) throw ConfigError("data_path", "is required");
  if (std::find(eval_n.begin(), eval_n.end(), 20) == eval_n.end()) {
    throw ConfigError("eval_n", "must include 20 (early stopping tracks NDCG@20)");
  }
  if (!sweep_param.empty() && sweep_values.empty()) throw ConfigError("sweep_values", "empty sweep");
  if (!sweep_param.empty()) {
    ExperimentConfig probe = *this;
    for (const auto& v : sweep_values) probe.set(sweep_param, v);
  }
  try {
    solver.validate();
  } catch (const std::exception& e) {
    throw ConfigError("solver", e.what());
  }
}

std::filesystem::path ExperimentConfig::resolved_output_dir() const {
  std::filesystem::path dir(output_dir);
  if (dir.is_relative()) {
    if (const char* root = std::getenv("GODECF_OUTPUT_ROOT"); root && *root) return std::filesystem::path(root) / dir;
  }
  return dir;
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected key=value, got '" + line + "'");
    }
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  return parse_config(in);
}

void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& item : overrides) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError(item, "override must be key=value");
    cfg.set(trim(item.substr(0, eq)), item.substr(eq + 1));
  }
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

SplitDataset load_dataset(const ExperimentConfig& cfg, std::ostream* log) {
  if (cfg.data_format == "split") return read_split(cfg.data_path);
  if (!std::filesystem::exists(cfg.data_path)) throw DataError("dataset file not found: " + cfg.data_path);
  ParseStats stats;
  InteractionLog raw = read_interactions(cfg.data_path, cfg.fields, &stats);
  InteractionLog core = k_core_filter(raw, cfg.kcore, cfg.kcore_mode);
  if (log) {
    *log << "parsed " << stats.parsed << " lines (" << stats.duplicates << " duplicates, " << stats.malformed
         << " malformed); " << core.size() << " interactions after " << cfg.kcore << "-core\n";
  }
  return leave_one_out_split(core);
}

namespace {

std::string embedding_file(const ExperimentConfig& cfg) {
  return cfg.checkpoint_format == "binary" ? "e0.bin" : "e0.txt";
}

void write_checkpoint(const std::filesystem::path& dir, const ExperimentConfig& cfg, const Recommender& model,
                      int epoch, double metric) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / embedding_file(cfg), std::ios::binary);
    if (cfg.checkpoint_format == "binary") write_embedding_binary(out, model.state.e0);
    else write_embedding_text(out, model.state.e0);
    if (!out) throw std::runtime_error("cannot write checkpoint embeddings");
  }
  std::string weights;
  for (double w : model.state.hop_weights) weights += format_double(w) + "\n";
  write_text_file(dir / "hop_weights.txt", weights);
  std::ostringstream meta;
  meta << "epoch=" << epoch << "\n"
       << "validation_ndcg20=" << format_double(metric) << "\n"
       << "config_hash=" << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(cfg.to_text()) << "\n";
  write_text_file(dir / "meta.txt", meta.str());
}

}  // namespace

Recommender load_checkpoint(const std::filesystem::path& run_dir, const ExperimentConfig& cfg, const SplitDataset& ds) {
  const auto dir = run_dir / "checkpoint";
  Recommender model = make_recommender(ds, cfg.model, cfg.solver, cfg.dims, cfg.init_std, cfg.train.seed,
                                       cfg.lightgcn_layers, cfg.threads);
  std::ifstream in(dir / embedding_file(cfg), std::ios::binary);
  if (!in) throw DataError("missing checkpoint embeddings in " + dir.string());
  EmbeddingMatrix e0 = cfg.checkpoint_format == "binary" ? read_embedding_binary(in) : read_embedding_text(in);
  if (e0.rows() != model.state.e0.rows() || e0.cols() != model.state.e0.cols()) {
    throw DataError("checkpoint shape does not match the dataset and config");
  }
  model.state.e0 = std::move(e0);
  std::ifstream weights(dir / "hop_weights.txt");
  std::vector<double> w;
  for (std::string token; weights >> token;) w.push_back(parse_number<double>("hop_weights", token));
  if (w.size() == model.state.hop_weights.size()) model.state.hop_weights = w;
  return model;
}

RunSummary run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const SplitDataset ds = load_dataset(cfg, log);
  if (log) {
    *log << "dataset: " << ds.n_users << " users, " << ds.n_items << " items, " << ds.train_size()
         << " train interactions\n";
  }

  const Recommender initial = make_recommender(ds, cfg.model, cfg.solver, cfg.dims, cfg.init_std, cfg.train.seed,
                                               cfg.lightgcn_layers, cfg.threads);
  const EvalOptions options{.exclude_validation_in_test = cfg.exclude_validation_in_test, .threads = cfg.threads};
  EvalHook hook = [&](const FinalEmbeddings& fe) {
    MetricsReport report = evaluate(fe, ds, EvalMode::Validation, cfg.eval_n, options);
    if (log) {
      *log << "  validation recall@20=" << report.recall_at(20) << " ndcg@20=" << report.ndcg_at(20) << "\n";
    }
    return report;
  };
  FitResult fitted = fit(ds, initial, cfg.train, hook);
  const MetricsReport test = evaluate(fitted.best.final_embeddings(), ds, EvalMode::Test, cfg.eval_n, options);

  RunSummary summary;
  summary.output_dir = cfg.resolved_output_dir();
  summary.test = test;
  summary.best_epoch = fitted.best_epoch;
  summary.epochs_run = static_cast<int>(fitted.history.size());
  summary.best_validation_ndcg20 = std::max(0.0, fitted.best_ndcg20);
  summary.diverged = fitted.diverged;
  summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  const auto& dir = summary.output_dir;
  std::filesystem::create_directories(dir);
  write_text_file(dir / "config.txt", cfg.to_text());
  {
    std::ofstream out(dir / "train_log.csv", std::ios::binary);
    write_training_log(out, fitted.history, cfg.train.record_time);
  }
  {
    std::ofstream out(dir / "metrics.csv", std::ios::binary);
    write_metrics_csv(out, EvalMode::Test, test);
  }
  write_checkpoint(dir / "checkpoint", cfg, fitted.best, fitted.best_epoch, summary.best_validation_ndcg20);

  std::ostringstream s;
  s << "model=" << to_string(cfg.model) << "\n"
    << "recall20=" << format_double(test.recall_at(20)) << "\n"
    << "ndcg20=" << format_double(test.ndcg_at(20)) << "\n"
    << "best_epoch=" << fitted.best_epoch << "\n"
    << "epochs_run=" << summary.epochs_run << "\n"
    << "diverged=" << (fitted.diverged ? "true" : "false") << "\n"
    << "seconds=" << format_double(summary.seconds) << "\n";
  write_text_file(dir / "summary.txt", s.str());

  const std::vector<std::string> artifacts = {"config.txt",
                                              "train_log.csv",
                                              "metrics.csv",
                                              "summary.txt",
                                              "checkpoint/" + embedding_file(cfg),
                                              "checkpoint/hop_weights.txt",
                                              "checkpoint/meta.txt"};
  std::string manifest;
  for (const auto& a : artifacts) manifest += a + "\n";
  write_text_file(dir / "manifest.txt", manifest);

  if (log) {
    *log << "test recall@20=" << test.recall_at(20) << " ndcg@20=" << test.ndcg_at(20) << " (best epoch "
         << fitted.best_epoch << ")\n";
  }
  return summary;
}

std::vector<RunSummary> run_sweep(const ExperimentConfig& cfg, bool parallel_runs, std::ostream* log) {
  if (cfg.sweep_param.empty()) throw ConfigError("sweep_param", "is required for a sweep");
  cfg.validate();
  const auto base = cfg.resolved_output_dir();
  std::vector<ExperimentConfig> runs;
  for (const auto& value : cfg.sweep_values) {
    ExperimentConfig run = cfg;
    run.set(cfg.sweep_param, value);
    run.sweep_param.clear();
    run.sweep_values.clear();
    run.output_dir = (base / (cfg.sweep_param + "=" + value)).string();
    runs.push_back(std::move(run));
  }

  std::vector<RunSummary> summaries;
  if (parallel_runs) {
    std::vector<std::future<RunSummary>> pending;
    for (const auto& run : runs) pending.push_back(std::async(std::launch::async, [run] { return run_experiment(run); }));
    for (auto& p : pending) summaries.push_back(p.get());
  } else {
    for (const auto& run : runs) {
      if (log) *log << "== " << run.output_dir << "\n";
      summaries.push_back(run_experiment(run, log));
    }
  }

  for (std::size_t k = 0; k < runs.size(); ++k) {
    std::ofstream out(summaries[k].output_dir / "summary.txt", std::ios::app);
    out << "sweep_param=" << cfg.sweep_param << "\n"
        << "sweep_value=" << cfg.sweep_values[k] << "\n";
  }
  emit_sweep_table(base, log);
  return summaries;
}

std::filesystem::path emit_sweep_table(const std::filesystem::path& results_dir, std::ostream* warnings) {
  if (!std::filesystem::is_directory(results_dir)) {
    throw std::runtime_error("results directory not found: " + results_dir.string());
  }
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(results_dir)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());

  std::ostringstream table;
  table << "run,param,value,recall20,ndcg20,epochs_to_best,seconds\n";
  std::size_t rows = 0;
  for (const auto& dir : dirs) {
    try {
      auto kv = read_key_values(dir / "summary.txt");
      for (const char* key : {"recall20", "ndcg20", "best_epoch", "seconds"}) {
        if (!kv.count(key)) throw std::runtime_error(std::string("summary lacks ") + key);
      }
      table << dir.filename().string() << ',' << kv["sweep_param"] << ',' << kv["sweep_value"] << ','
            << kv["recall20"] << ',' << kv["ndcg20"] << ',' << kv["best_epoch"] << ',' << kv["seconds"] << '\n';
      ++rows;
    } catch (const std::exception& e) {
      if (warnings) *warnings << "warning: skipping " << dir.string() << ": " << e.what() << "\n";
    }
  }
  if (rows == 0) throw std::runtime_error("no completed runs under " + results_dir.string());
  const auto path = results_dir / "sweep.csv";
  write_text_file(path, table.str());
  return path;
}

}  // namespace godecf
