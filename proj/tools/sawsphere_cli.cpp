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

// sawsphere: train | sweep | density-check | export-stream
//
// Exit codes: 0 ok, 1 runtime failure (or a failed density check), 2 bad
// configuration.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sawsphere/density_checks.hpp"
#include "sawsphere/experiment.hpp"

namespace {

using namespace sawsphere;

const std::map<std::string, std::string>& descriptions() {
  static const std::map<std::string, std::string> d = {
      {"dataset", "blobs or cifar10"},
      {"cifar_dir", "directory with data_batch_*.bin and test_batch.bin"},
      {"tasks", "number of tasks"},
      {"classes_per_task", "disjoint classes introduced by each task"},
      {"random_label_order", "shuffle the label-to-task assignment with the seed"},
      {"input_dim", "blobs: input dimension"},
      {"blob_spread", "blobs: noise std in units of the center separation"},
      {"train_per_class", "training samples per class"},
      {"test_per_class", "test samples per class"},
      {"standardize", "cifar10: per-channel standardization"},
      {"blur_sigma", "Half-Normal scale for blurry boundaries; 0 keeps them clear"},
      {"trunk", "representation trunk widths, comma separated"},
      {"head", "projection head hidden widths, comma separated"},
      {"latent", "latent (output sphere) dimension; must be >= number of labels"},
      {"loss", "vmf or agd"},
      {"kappa2", "squared concentration; default 7 for vmf, 0.2 for agd"},
      {"mean_mode", "fixed_basis or spherical_estimate"},
      {"stream_batch", "stream batch size"},
      {"memory_batch", "samples retrieved from memory per step"},
      {"views", "augmented views per sample (0 disables augmentation)"},
      {"lr", "Adam learning rate"},
      {"memory", "replay memory capacity"},
      {"noise_std", "additive noise in augmentation; default 0.05 x blob_spread for blobs, 0 for images"},
      {"scale_jitter", "augmentation: uniform scale in [1 - s, 1 + s]"},
      {"dropout", "augmentation: coordinate dropout probability"},
      {"seed", "seed for data, schedule, stream, init and training"},
  };
  return d;
}

struct RunFlags {
  std::string config;
  std::string out;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

void add_run_options(CLI::App* sub, RunFlags& f) {
  sub->add_option("--config", f.config, "flat key = value file; flags given here override it");
  sub->add_option("--out", f.out, "output root (default $SAWSPHERE_OUT, else ./runs)");
  const RunConfig defaults;
  for (const auto& [key, def] : config_entries(defaults)) {
    std::string names = "--" + key;
    if (key.find('_') != std::string::npos) {
      std::string dashed = key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      names += ",--" + dashed;
    }
    std::string shown = def;
    if (key == "kappa2" || key == "noise_std") shown = "auto";
    f.options[key] = sub->add_option(names, f.values[key], descriptions().at(key))->default_str(shown);
  }
}

RunConfig resolve(const RunFlags& f) {
  RunConfig c;
  if (!f.config.empty()) apply_config_file(c, f.config);
  for (const auto& [key, opt] : f.options) {
    if (opt->count() > 0) set_field(c, key, f.values.at(key));
  }
  c.validate();
  return c;
}

std::filesystem::path root_of(const RunFlags& f) {
  return f.out.empty() ? output_root() : std::filesystem::path(f.out);
}

int cmd_train(const RunFlags& f) {
  const RunConfig c = resolve(f);
  const RunResult r = run_experiment(c);
  const auto dir = run_directory(root_of(f), c);
  write_run_artifacts(r, dir);
  std::cout << "run " << dir.string() << "\n";
  std::cout << "final_aa " << r.final_aa << "\n";
  return 0;
}

int cmd_sweep(const RunFlags& f, const std::string& param, const std::vector<std::string>& values, int seeds,
              std::string csv) {
  const RunConfig base = resolve(f);
  const auto root = root_of(f);
  const auto rows = run_sweep(base, param, values, seeds, [&](const RunResult& r) {
    const auto dir = run_directory(root, r.config);
    write_run_artifacts(r, dir);
    std::cerr << param << " run " << dir.string() << " final_aa " << r.final_aa << "\n";
  });
  if (csv.empty()) {
    csv = (root / ("sweep-" + param + "-" + config_hash(base) + "-" + std::to_string(base.seed) + ".csv")).string();
  }
  std::ostringstream os;
  write_sweep_csv(os, base, param, rows);
  std::filesystem::create_directories(std::filesystem::path(csv).parent_path().empty()
                                          ? std::filesystem::path(".")
                                          : std::filesystem::path(csv).parent_path());
  write_file(csv, os.str());
  std::cout << os.str();
  std::cout << "wrote " << csv << "\n";
  return 0;
}

int cmd_density_check(std::uint64_t seed, bool inject_printed, std::size_t samples) {
  const Convention conv = inject_printed ? Convention::as_printed : Convention::derived;
  std::printf("convention %s: ", to_string(conv));
  if (conv == Convention::derived) {
    std::printf("recursive form uses (2pi)^((d-1)/2) and gamma = u'S^-1 mu / sqrt(u'S^-1 u)\n");
  } else {
    std::printf("recursive form uses (2pi)^(d/2-1) and alpha = u'S^-1 mu / (u'S^-1 u)\n");
  }
  bool ok = true;
  auto report = [&](const char* name, bool pass, const std::string& detail) {
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
    ok = ok && pass;
  };
  char buf[256];

  const auto tri = trifecta_check({2, 3, 5, 10}, 50, seed);
  std::snprintf(buf, sizeof(buf), "%d cases, max relative error %.3g (limit 1e-8)", tri.cases, tri.max_error());
  report("three projected-normal forms agree", tri.max_error() <= 1e-8, buf);

  const auto agd = agd_normalization_check(5, seed + 1);
  std::snprintf(buf, sizeof(buf), "S^1 max |I - 1| %.3g (limit 1e-6), S^2 max |I - 1| %.3g (limit 1e-3)",
                agd.max_circle_error(), agd.max_sphere_error());
  report("AGD density normalizes", agd.max_circle_error() <= 1e-6 && agd.max_sphere_error() <= 1e-3, buf);

  const auto pn = projected_normal_normalization_check(5, seed + 2, conv);
  std::snprintf(buf, sizeof(buf), "S^1 max |I - 1| %.3g (limit 1e-6), S^2 max |I - 1| %.3g (limit 1e-3)",
                pn.max_circle_error(), pn.max_sphere_error());
  report("projected normal normalizes", pn.max_circle_error() <= 1e-6 && pn.max_sphere_error() <= 1e-3, buf);

  const auto chi = sampler_chi_square_check(samples, seed + 3);
  std::snprintf(buf, sizeof(buf), "%zu samples, chi2 %.1f on %.0f dof, p = %.3g (limit p > 0.01)", samples,
                chi.statistic, chi.dof, chi.pvalue);
  report("sampler matches density", chi.pvalue > 0.01, buf);
  return ok ? 0 : 1;
}

int cmd_export_stream(const RunFlags& f, std::size_t window) {
  const RunConfig c = resolve(f);
  const PreparedData p = prepare_data(c);
  const auto dir = f.out.empty() ? run_directory(output_root(), c) : std::filesystem::path(f.out);
  std::filesystem::create_directories(dir);
  const std::string header = config_comment(c);
  std::ostringstream manifest, props;
  manifest << header;
  write_manifest(manifest, p.train, p.schedule, p.order);
  props << header;
  write_class_proportions(props, p.train, p.schedule, p.order, window);
  write_file(dir / "stream_manifest.csv", manifest.str());
  write_file(dir / "class_proportions.csv", props.str());
  std::cout << "wrote " << (dir / "stream_manifest.csv").string() << " (" << p.order.size() << " rows)\n";
  std::cout << "wrote " << (dir / "class_proportions.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sawsphere: fixed-direction spherical losses for online continual learning"};
  app.require_subcommand(1);

  RunFlags train_flags, sweep_flags, export_flags;
  auto* train = app.add_subcommand("train", "train once and write metrics, accuracy matrix, summary, checkpoint");
  add_run_options(train, train_flags);

  auto* sweep = app.add_subcommand("sweep", "final AA over seeds for each value of one parameter");
  add_run_options(sweep, sweep_flags);
  std::string param, csv;
  std::vector<std::string> values;
  int seeds = 5;
  sweep->add_option("--param", param, "kappa2 | views | mean_mode | blur_sigma | memory")->required();
  sweep->add_option("--values", values, "comma separated values")->required()->delimiter(',');
  sweep->add_option("--seeds", seeds, "seeds per value, counting up from --seed")->capture_default_str();
  sweep->add_option("--csv", csv, "output CSV (default <out>/sweep-<param>-<hash>-<seed>.csv)");

  auto* density = app.add_subcommand("density-check", "self-test of the spherical densities and sampler");
  std::uint64_t check_seed = 1;
  bool inject = false;
  std::size_t samples = 1000000;
  density->add_option("--seed", check_seed, "seed for random parameters")->capture_default_str();
  density->add_option("--samples", samples, "sampler draws")->capture_default_str();
  density->add_flag("--inject-printed-prefactor", inject,
                    "evaluate the unnormalized alternative constants (negative control; should fail)");

  auto* export_stream = app.add_subcommand("export-stream", "write the stream manifest and class proportions");
  add_run_options(export_stream, export_flags);
  std::size_t window = 100;
  export_stream->add_option("--window", window, "positions per proportion window")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (*train) return cmd_train(train_flags);
    if (*sweep) return cmd_sweep(sweep_flags, param, values, seeds, csv);
    if (*density) return cmd_density_check(check_seed, inject, samples);
    if (*export_stream) return cmd_export_stream(export_flags, window);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
