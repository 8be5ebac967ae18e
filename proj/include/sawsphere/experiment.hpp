// Copyright 2026 The sawsphere Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// End-to-end runs: dataset, schedule, stream order, encoder, training and
// evaluation from one flat configuration.

#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sawsphere/errors.hpp"
#include "sawsphere/map_loss.hpp"
#include "sawsphere/network.hpp"
#include "sawsphere/stream.hpp"
#include "sawsphere/trainer.hpp"

namespace sawsphere {

struct RunConfig {
  // Data.
  std::string dataset = "blobs";  ///< blobs | cifar10
  std::string cifar_dir;
  int tasks = 3;
  int classes_per_task = 2;
  bool random_label_order = true;
  int input_dim = 16;        ///< blobs only
  double blob_spread = 0.15;  ///< blobs, in units of center separation
  int train_per_class = 500;
  int test_per_class = 200;
  bool standardize = true;  ///< cifar10 per-channel
  double blur_sigma = 0.0;  ///< 0 keeps clear boundaries

  // Encoder.
  std::vector<int> trunk = {128, 128};
  std::vector<int> head = {128};
  int latent = 64;

  // Training.
  std::string loss = "agd";
  double kappa2 = -1.0;  ///< negative selects the per-kernel default
  std::string mean_mode = "fixed_basis";
  std::size_t stream_batch = 10;
  std::size_t memory_batch = 64;
  int views = 5;
  double lr = 3e-3;
  std::size_t memory = 200;
  double noise_std = -1.0;  ///< negative: 0.05 x spread for blobs, 0 for images
  double scale_jitter = 0.0;
  double dropout = 0.0;
  std::uint64_t seed = 0;

  [[nodiscard]] double resolved_kappa2() const {
    return kappa2 < 0.0 ? default_kappa2(parse_kernel_kind(loss)) : kappa2;
  }

  [[nodiscard]] double resolved_noise_std() const {
    if (noise_std >= 0.0) return noise_std;
    return dataset == "blobs" ? 0.05 * blob_spread : 0.0;
  }

  void validate() const {
    if (dataset != "blobs" && dataset != "cifar10") {
      throw ConfigError("dataset must be blobs or cifar10, got '" + dataset + "'");
    }
    if (dataset == "cifar10" && cifar_dir.empty()) throw ConfigError("cifar10 needs cifar_dir");
    if (tasks < 1 || classes_per_task < 1) throw ConfigError("tasks and classes_per_task must be >= 1");
    if (train_per_class < 1 || test_per_class < 1) throw ConfigError("per-class counts must be >= 1");
    if (dataset == "blobs" && tasks * classes_per_task > input_dim) {
      throw ConfigError("blobs: input_dim must be >= tasks x classes_per_task");
    }
    if (!(blob_spread >= 0.0)) throw ConfigError("blob_spread must be >= 0");
    if (!(blur_sigma >= 0.0)) throw ConfigError("blur_sigma must be >= 0");
    if (latent < 2) throw ConfigError("latent must be >= 2");
    for (int w : trunk)
      if (w < 1) throw ConfigError("trunk widths must be >= 1");
    for (int w : head)
      if (w < 1) throw ConfigError("head widths must be >= 1");
    (void)parse_kernel_kind(loss);
    (void)parse_mean_mode(mean_mode);
    if (!(resolved_kappa2() > 0.0)) throw ConfigError("kappa2 must be > 0");
    if (stream_batch < 1 || memory_batch < 1) throw ConfigError("batch sizes must be >= 1");
    if (views < 0) throw ConfigError("views must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, r.ptr};
}

inline std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace detail

/// Resolved configuration as ordered key = value pairs (defaults filled in).
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
  using detail::format_double;
  return {
      {"dataset", c.dataset},
      {"cifar_dir", c.cifar_dir},
      {"tasks", std::to_string(c.tasks)},
      {"classes_per_task", std::to_string(c.classes_per_task)},
      {"random_label_order", c.random_label_order ? "true" : "false"},
      {"input_dim", std::to_string(c.input_dim)},
      {"blob_spread", format_double(c.blob_spread)},
      {"train_per_class", std::to_string(c.train_per_class)},
      {"test_per_class", std::to_string(c.test_per_class)},
      {"standardize", c.standardize ? "true" : "false"},
      {"blur_sigma", format_double(c.blur_sigma)},
      {"trunk", detail::join_ints(c.trunk)},
      {"head", detail::join_ints(c.head)},
      {"latent", std::to_string(c.latent)},
      {"loss", c.loss},
      {"kappa2", format_double(c.resolved_kappa2())},
      {"mean_mode", to_string(parse_mean_mode(c.mean_mode))},
      {"stream_batch", std::to_string(c.stream_batch)},
      {"memory_batch", std::to_string(c.memory_batch)},
      {"views", std::to_string(c.views)},
      {"lr", format_double(c.lr)},
      {"memory", std::to_string(c.memory)},
      {"noise_std", format_double(c.resolved_noise_std())},
      {"scale_jitter", format_double(c.scale_jitter)},
      {"dropout", format_double(c.dropout)},
      {"seed", std::to_string(c.seed)},
  };
}

/// key = value lines, loadable again as a config file.
inline std::string config_text(const RunConfig& c) {
  std::string out;
  for (const auto& [k, v] : config_entries(c)) out += k + " = " + v + "\n";
  return out;
}

/// FNV-1a of the resolved configuration without the seed.
inline std::string config_hash(const RunConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : config_entries(c)) {
    if (k == "seed") continue;
    for (char ch : k + "=" + v + ";") {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError("config: bad value '" + v + "' for " + key);
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: " + key + " must be true or false, got '" + v + "'");
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  return out;
}

}  // namespace detail

/// Set one field from its text form. Unknown keys and malformed values are
/// configuration errors.
inline void set_field(RunConfig& c, const std::string& key, const std::string& raw) {
  using detail::parse_number;
  const std::string v = detail::trim(raw);
  if (key == "dataset") c.dataset = v;
  else if (key == "cifar_dir") c.cifar_dir = v;
  else if (key == "tasks") c.tasks = parse_number<int>(key, v);
  else if (key == "classes_per_task") c.classes_per_task = parse_number<int>(key, v);
  else if (key == "random_label_order") c.random_label_order = detail::parse_bool(key, v);
  else if (key == "input_dim") c.input_dim = parse_number<int>(key, v);
  else if (key == "blob_spread") c.blob_spread = parse_number<double>(key, v);
  else if (key == "train_per_class") c.train_per_class = parse_number<int>(key, v);
  else if (key == "test_per_class") c.test_per_class = parse_number<int>(key, v);
  else if (key == "standardize") c.standardize = detail::parse_bool(key, v);
  else if (key == "blur_sigma") c.blur_sigma = parse_number<double>(key, v);
  else if (key == "trunk") c.trunk = detail::parse_int_list(key, v);
  else if (key == "head") c.head = detail::parse_int_list(key, v);
  else if (key == "latent") c.latent = parse_number<int>(key, v);
  else if (key == "loss") c.loss = v;
  else if (key == "kappa2") c.kappa2 = parse_number<double>(key, v);
  else if (key == "mean_mode") c.mean_mode = v;
  else if (key == "stream_batch") c.stream_batch = parse_number<std::size_t>(key, v);
  else if (key == "memory_batch") c.memory_batch = parse_number<std::size_t>(key, v);
  else if (key == "views") c.views = parse_number<int>(key, v);
  else if (key == "lr") c.lr = parse_number<double>(key, v);
  else if (key == "memory") c.memory = parse_number<std::size_t>(key, v);
  else if (key == "noise_std") c.noise_std = parse_number<double>(key, v);
  else if (key == "scale_jitter") c.scale_jitter = parse_number<double>(key, v);
  else if (key == "dropout") c.dropout = parse_number<double>(key, v);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else throw ConfigError("config: unknown key '" + key + "'");
}

/// Flat "key = value" lines; '#' starts a comment, blank lines are skipped.
inline void apply_config_text(RunConfig& c, const std::string& text, const std::string& origin = "config") {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      set_field(c, detail::trim(std::string_view(line).substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void apply_config_file(RunConfig& c, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(c, ss.str(), path.string());
}

/// One comment line carrying the resolved configuration, for CSV headers.
inline std::string config_comment(const RunConfig& c) {
  std::string out = "# sawsphere";
  for (const auto& [k, v] : config_entries(c)) out += " " + k + "=" + v;
  return out + "\n";
}

struct PreparedData {
  Dataset train;
  std::vector<LabeledBatch> test_sets;  ///< one per task
  TaskSchedule schedule;
  std::vector<std::size_t> order;
  std::vector<std::size_t> eval_after;  ///< stream batches before each evaluation
};

inline Dataset load_cifar_split(const std::filesystem::path& dir, bool train) {
  std::vector<std::filesystem::path> files;
  if (train) {
    for (int i = 1; i <= 5; ++i) {
      const auto p = dir / ("data_batch_" + std::to_string(i) + ".bin");
      if (std::filesystem::exists(p)) files.push_back(p);
    }
  } else {
    files.push_back(dir / "test_batch.bin");
  }
  if (files.empty()) throw FormatError("cifar10: no data_batch_*.bin in " + dir.string());
  return load_cifar10_files(files);
}

inline PreparedData prepare_data(const RunConfig& c) {
  c.validate();
  PreparedData p;
  Dataset test;
  const int labels = c.dataset == "blobs" ? c.tasks * c.classes_per_task : 10;
  p.schedule = TaskSchedule::make(labels, c.tasks, c.classes_per_task, c.random_label_order, c.seed);
  if (c.dataset == "blobs") {
    const Eigen::MatrixXd centers = blob_centers(labels, c.input_dim, c.seed);
    p.train = synth_blobs_with_centers(centers, static_cast<std::size_t>(c.train_per_class), c.blob_spread,
                                       c.seed * 2 + 1);
    test = synth_blobs_with_centers(centers, static_cast<std::size_t>(c.test_per_class), c.blob_spread,
                                    c.seed * 2 + 2);
  } else {
    const Dataset full_train = load_cifar_split(c.cifar_dir, true);
    const Dataset full_test = load_cifar_split(c.cifar_dir, false);
    p.train = subset_per_class(full_train, p.schedule.label_permutation,
                               static_cast<std::size_t>(c.train_per_class));
    test = subset_per_class(full_test, p.schedule.label_permutation,
                            static_cast<std::size_t>(c.test_per_class));
    if (c.standardize) {
      const auto stats = channel_stats(p.train);
      standardize(p.train, stats);
      standardize(test, stats);
    }
  }
  for (int t = 0; t < c.tasks; ++t) {
    const auto cls = p.schedule.classes_of(t);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (std::find(cls.begin(), cls.end(), test.y[i]) != cls.end()) idx.push_back(i);
    }
    p.test_sets.push_back(test.gather(idx));
  }
  p.order = make_clear_stream(p.train, p.schedule, c.seed + 17);
  const std::size_t n = p.order.size();
  if (c.blur_sigma > 0.0) {
    p.order = blurry_shuffle(p.order, c.blur_sigma, c.seed + 23);
    // No task ends to speak of: K evenly spaced checkpoints.
    for (int k = 1; k <= c.tasks; ++k) {
      const std::size_t pos = n * static_cast<std::size_t>(k) / static_cast<std::size_t>(c.tasks);
      p.eval_after.push_back((pos + c.stream_batch - 1) / c.stream_batch);
    }
  } else {
    std::size_t cum = 0;
    const auto ids = task_ids_of(p.train, p.schedule, p.order);
    for (int k = 0; k < c.tasks; ++k) {
      cum += static_cast<std::size_t>(std::count(ids.begin(), ids.end(), k));
      p.eval_after.push_back((cum + c.stream_batch - 1) / c.stream_batch);
    }
  }
  return p;
}

inline TrainConfig train_config(const RunConfig& c, int num_classes) {
  TrainConfig t;
  t.stream_batch = c.stream_batch;
  t.memory_batch = c.memory_batch;
  t.views = c.views;
  t.lr = c.lr;
  t.memory_capacity = c.memory;
  t.seed = c.seed;
  t.loss.kind = parse_kernel_kind(c.loss);
  t.loss.kappa = std::sqrt(c.resolved_kappa2());
  t.loss.dim = c.latent;
  t.loss.num_classes = num_classes;
  t.loss.mean_mode = parse_mean_mode(c.mean_mode);
  t.augment.noise_std = c.resolved_noise_std();
  t.augment.scale_jitter = c.scale_jitter;
  t.augment.dropout = c.dropout;
  return t;
}

struct RunResult {
  RunConfig config;
  TrainResult train;
  double final_aa = 0.0;
  double wall_seconds = 0.0;
};

inline RunResult run_experiment(const RunConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  PreparedData data = prepare_data(c);
  if (c.latent < data.train.num_classes) {
    throw ConfigError("latent (" + std::to_string(c.latent) + ") must be >= number of labels (" +
                      std::to_string(data.train.num_classes) + ")");
  }
  const TrainConfig tc = train_config(c, data.train.num_classes);
  Network net(NetworkSpec::mlp(data.train.input_dim(), c.trunk, c.head, c.latent), c.seed + 101);
  TrainResult tr = train_run(tc, std::move(net), data.train, data.order, data.test_sets, data.eval_after);
  const double aa = final_average_accuracy(tr.accuracy);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return RunResult{c, std::move(tr), aa, secs};
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

/// $SAWSPHERE_OUT, else ./runs.
inline std::filesystem::path output_root() {
  const char* env = std::getenv("SAWSPHERE_OUT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("runs");
}

inline std::filesystem::path run_directory(const std::filesystem::path& root, const RunConfig& c) {
  return root / (config_hash(c) + "-" + std::to_string(c.seed));
}

inline nlohmann::ordered_json config_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  for (const auto& [k, v] : config_entries(c)) j[k] = v;
  return j;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

/// config.txt, metrics.csv, accuracy.csv, checkpoint.txt, summary.json.
/// Everything but summary.json is a pure function of config and seed.
inline void write_run_artifacts(const RunResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string header = config_comment(r.config);
  write_file(dir / "config.txt", config_text(r.config));
  std::ostringstream metrics, acc, ckpt;
  metrics << header;
  write_metrics_csv(metrics, r.train.trainer.log());
  write_file(dir / "metrics.csv", metrics.str());
  acc << header;
  r.train.accuracy.write_csv(acc);
  write_file(dir / "accuracy.csv", acc.str());
  ckpt << header;
  r.train.trainer.network().save(ckpt);
  write_file(dir / "checkpoint.txt", ckpt.str());

  nlohmann::ordered_json j;
  j["config"] = config_json(r.config);
  j["config_hash"] = config_hash(r.config);
  j["seed"] = r.config.seed;
  j["final_aa"] = r.final_aa;
  j["per_task_accuracy"] = r.train.accuracy.rows.back();
  j["accuracy_matrix"] = r.train.accuracy.rows;
  j["steps"] = r.train.trainer.log().size();
  j["wall_time_seconds"] = r.wall_seconds;
  j["finished_at"] = utc_timestamp();
  write_file(dir / "summary.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& sweep_parameters() {
  static const std::vector<std::string> names = {"kappa2", "views", "mean_mode", "blur_sigma", "memory"};
  return names;
}

struct SweepRow {
  std::string value;
  double mean = 0.0;
  double stddev = 0.0;  ///< sample standard deviation, 0 for one seed
  std::vector<double> final_aa;
};

/// Each value over seeds base.seed, base.seed + 1, ... `on_run` sees every
/// finished run (for writing artifacts).
template <class OnRun>
std::vector<SweepRow> run_sweep(const RunConfig& base, const std::string& parameter,
                                const std::vector<std::string>& values, int seeds, OnRun&& on_run) {
  const auto& allowed = sweep_parameters();
  if (std::find(allowed.begin(), allowed.end(), parameter) == allowed.end()) {
    throw ConfigError("sweep: unknown parameter '" + parameter + "'");
  }
  if (values.empty()) throw ConfigError("sweep: no values");
  if (seeds < 1) throw ConfigError("sweep: seeds must be >= 1");
  // Validate every point before spending time on any run.
  std::vector<RunConfig> points;
  for (const auto& v : values) {
    RunConfig c = base;
    set_field(c, parameter, v);
    c.validate();
    points.push_back(c);
  }
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    SweepRow row{values[i], 0.0, 0.0, {}};
    for (int s = 0; s < seeds; ++s) {
      RunConfig c = points[i];
      c.seed = base.seed + static_cast<std::uint64_t>(s);
      const RunResult r = run_experiment(c);
      on_run(r);
      row.final_aa.push_back(r.final_aa);
    }
    const double n = static_cast<double>(row.final_aa.size());
    for (double a : row.final_aa) row.mean += a / n;
    if (row.final_aa.size() > 1) {
      double ss = 0.0;
      for (double a : row.final_aa) ss += (a - row.mean) * (a - row.mean);
      row.stddev = std::sqrt(ss / (n - 1.0));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<SweepRow> run_sweep(const RunConfig& base, const std::string& parameter,
                                       const std::vector<std::string>& values, int seeds) {
  return run_sweep(base, parameter, values, seeds, [](const RunResult&) {});
}

/// value,final_aa_mean,final_aa_std,seeds
inline void write_sweep_csv(std::ostream& os, const RunConfig& base, const std::string& parameter,
                            const std::vector<SweepRow>& rows) {
  os << config_comment(base) << "# sweep " << parameter << "\n";
  os << "value,final_aa_mean,final_aa_std,seeds\n";
  for (const auto& r : rows) {
    os << r.value << ',' << detail::format_double(r.mean) << ',' << detail::format_double(r.stddev) << ','
       << r.final_aa.size() << '\n';
  }
}

}  // namespace sawsphere
