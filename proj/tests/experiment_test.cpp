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

#include "sawsphere/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "cifar_fixture.hpp"

namespace sawsphere {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig tiny() {
  RunConfig c;
  c.train_per_class = 40;
  c.test_per_class = 20;
  c.trunk = {16};
  c.head = {16};
  c.latent = 8;
  c.memory_batch = 8;
  c.views = 1;
  return c;
}

TEST(Config, TextRoundTrips) {
  RunConfig c;
  c.loss = "vmf";
  c.trunk = {7, 5};
  c.blur_sigma = 12.5;
  c.seed = 42;
  RunConfig back;
  apply_config_text(back, config_text(c));
  EXPECT_EQ(config_entries(back), config_entries(c));
  EXPECT_EQ(back.resolved_kappa2(), 7.0);
}

TEST(Config, CommentsBlanksAndErrors) {
  RunConfig c;
  apply_config_text(c, "# header\n\n  tasks = 4   # trailing\nrandom_label_order=false\n");
  EXPECT_EQ(c.tasks, 4);
  EXPECT_FALSE(c.random_label_order);
  EXPECT_THROW(apply_config_text(c, "nokey\n"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "colour = red\n"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "tasks = 3x\n"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "standardize = maybe\n"), ConfigError);
  EXPECT_THROW(apply_config_file(c, "/nonexistent/run.ini"), ConfigError);
}

TEST(Config, Validation) {
  RunConfig c;
  c.loss = "gauss";
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.mean_mode = "learned";
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.views = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.dataset = "cifar10";
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.latent = 4;  // fewer dimensions than the 6 labels
  EXPECT_THROW((void)run_experiment(c), ConfigError);
}

TEST(Config, HashIgnoresSeedOnly) {
  RunConfig a, b;
  b.seed = 9;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.views = 3;
  EXPECT_NE(config_hash(a), config_hash(b));
  // Defaults resolve before hashing: explicit 0.2 equals the AGD default.
  RunConfig c;
  c.kappa2 = 0.2;
  EXPECT_EQ(config_hash(a), config_hash(c));
  EXPECT_NE(run_directory("r", a), run_directory("r", b));
}

TEST(Prepare, ClearEvaluationAtTaskEnds) {
  RunConfig c;
  const auto p = prepare_data(c);
  EXPECT_EQ(p.order.size(), 3000u);
  EXPECT_EQ(p.eval_after, (std::vector<std::size_t>{100, 200, 300}));
  for (int t = 0; t < 3; ++t) {
    const auto cls = p.schedule.classes_of(t);
    const std::set<int> want(cls.begin(), cls.end());
    const std::set<int> got(p.test_sets[t].y.begin(), p.test_sets[t].y.end());
    EXPECT_EQ(got, want);
    EXPECT_EQ(p.test_sets[t].size(), 400);
  }
}

TEST(Prepare, BlurryEvaluationEvenlySpaced) {
  RunConfig c;
  c.blur_sigma = 200;
  c.stream_batch = 7;
  const auto p = prepare_data(c);
  EXPECT_EQ(p.eval_after, (std::vector<std::size_t>{143, 286, 429}));
  std::vector<std::size_t> sorted = p.order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) ASSERT_EQ(sorted[i], i);
}

TEST(Run, ArtifactsDeterministic) {
  const auto root = std::filesystem::temp_directory_path() / "sawsphere_experiment_test";
  std::filesystem::remove_all(root);
  const RunConfig c = tiny();
  write_run_artifacts(run_experiment(c), root / "a");
  write_run_artifacts(run_experiment(c), root / "b");
  for (const char* f : {"metrics.csv", "accuracy.csv", "checkpoint.txt", "config.txt"}) {
    EXPECT_EQ(slurp(root / "a" / f), slurp(root / "b" / f)) << f;
  }
  // Config echo in every artifact, and the checkpoint loads back.
  EXPECT_EQ(slurp(root / "a" / "metrics.csv").rfind(config_comment(c), 0), 0u);
  EXPECT_NE(slurp(root / "a" / "summary.json").find("\"final_aa\""), std::string::npos);
  std::ifstream ck(root / "a" / "checkpoint.txt");
  const Network net = Network::load(ck);
  EXPECT_EQ(net.spec().latent_dim(), 8);
  RunConfig reread;
  apply_config_file(reread, root / "a" / "config.txt");
  EXPECT_EQ(config_entries(reread), config_entries(c));
}

TEST(Run, ViewsZeroTrains) {
  RunConfig c = tiny();
  c.views = 0;
  const auto r = run_experiment(c);
  EXPECT_EQ(r.train.trainer.log().size(), 24u);
  EXPECT_TRUE(r.train.accuracy.complete());
}

TEST(Run, VmfAndAgdTrackEachOther) {
  RunConfig c;
  c.train_per_class = 200;
  c.test_per_class = 100;
  const double agd = run_experiment(c).final_aa;
  c.loss = "vmf";
  const double vmf = run_experiment(c).final_aa;
  EXPECT_LE(std::abs(agd - vmf), 0.10) << agd << " " << vmf;
}

TEST(Sweep, ShapeAndErrors) {
  RunConfig c = tiny();
  EXPECT_THROW((void)run_sweep(c, "lr", {"0.1"}, 1), ConfigError);
  EXPECT_THROW((void)run_sweep(c, "views", {"-2"}, 1), ConfigError);
  const auto rows = run_sweep(c, "kappa2", {"0.02", "0.2", "2", "20"}, 2);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.final_aa.size(), 2u);
    EXPECT_GE(r.stddev, 0.0);
  }
  std::ostringstream os;
  write_sweep_csv(os, c, "kappa2", rows);
  const std::string text = os.str();
  EXPECT_NE(text.find("value,final_aa_mean,final_aa_std,seeds\n0.02,"), std::string::npos);
}

TEST(Run, CifarFormatPipeline) {
  const auto dir = std::filesystem::temp_directory_path() / "sawsphere_cifar_like";
  testing::write_cifar_like_dir(dir, 30, 10, 3);
  RunConfig c;
  c.dataset = "cifar10";
  c.cifar_dir = dir.string();
  c.tasks = 2;
  c.train_per_class = 30;
  c.test_per_class = 10;
  c.trunk = {16};
  c.head = {};
  c.latent = 10;
  c.views = 1;
  c.memory_batch = 8;
  const auto r = run_experiment(c);
  EXPECT_EQ(r.train.trainer.log().size(), 12u);  // 4 classes x 30 / 10
  EXPECT_TRUE(r.train.accuracy.complete());
  const auto p = prepare_data(c);
  EXPECT_EQ(p.train.input_dim(), 3072);
  EXPECT_NEAR(p.train.x.mean(), 0.0, 1e-9);  // standardized
}

}  // namespace
}  // namespace sawsphere
