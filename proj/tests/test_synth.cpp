#include <gtest/gtest.h>

#include "support.hpp"
#include "tcp/evaluation.hpp"
#include "tcp/synth.hpp"

using namespace tcp;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.files = 40;
  cfg.tests = 20;
  cfg.builds = 20;
  return cfg;
}

// Pearson chi-square of a 2x2 table: rows = a covered file changed, columns = failed.
double chi_square(const double table[2][2]) {
  const double n = table[0][0] + table[0][1] + table[1][0] + table[1][1];
  double chi = 0.0;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      const double expected = (table[r][0] + table[r][1]) * (table[0][c] + table[1][c]) / n;
      if (expected > 0) chi += (table[r][c] - expected) * (table[r][c] - expected) / expected;
    }
  return chi;
}

double change_failure_chi_square(const SynthConfig& cfg, std::uint64_t seed) {
  tcptest::TempDir dir;
  auto out = generate_synthetic_history(cfg, seed, dir / "ds");
  auto ds = load_dataset(out.layout.root);
  EXPECT_EQ(out.truth.coverage_epochs.size(), 1u);
  const auto& coverage = out.truth.coverage_epochs.at(0).coverage;
  const std::set<std::string> flaky(out.truth.flaky_tests.begin(), out.truth.flaky_tests.end());
  double table[2][2] = {{0, 0}, {0, 0}};
  for (const auto& b : ds.history.builds)
    for (const auto& r : b.records) {
      if (flaky.contains(r.test.path())) continue;
      bool touched = false;
      auto it = coverage.find(r.test.path());
      if (it != coverage.end())
        for (const auto& f : it->second) touched = touched || b.change_set.changed_files.contains(f);
      table[touched][is_failed(r.verdict)] += 1;
    }
  return chi_square(table);
}

}  // namespace

TEST(Synth, SameSeedSameBytes) {
  tcptest::TempDir dir;
  auto a = generate_synthetic_history(small_config(), 7, dir / "a");
  auto b = generate_synthetic_history(small_config(), 7, dir / "b");
  for (auto f : {"builds.csv", "exec_records.csv", "commits.jsonl", "ground_truth.json"})
    EXPECT_EQ(tcptest::read_file(dir / "a" / f), tcptest::read_file(dir / "b" / f)) << f;
  auto c = generate_synthetic_history(small_config(), 8, dir / "c");
  EXPECT_NE(tcptest::read_file(dir / "a/exec_records.csv"), tcptest::read_file(dir / "c/exec_records.csv"));
}

TEST(Synth, OutputLoads) {
  tcptest::TempDir dir;
  auto out = generate_synthetic_history(small_config(), 1, dir / "ds");
  auto ds = load_dataset(out.layout.root);
  EXPECT_EQ(ds.history.builds.size(), 20u);
  ASSERT_TRUE(ds.layout.repo);
  for (const auto& b : ds.history.builds) {
    std::set<TestId> seen;
    for (const auto& r : b.records) EXPECT_TRUE(seen.insert(r.test).second);
  }
  EXPECT_THROW(generate_synthetic_history(small_config(), 1, dir / "ds"), Error);  // not empty
}

TEST(Synth, ConfigValidationAndJson) {
  auto cfg = small_config();
  cfg.drift_period = 5;
  auto back = SynthConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
  EXPECT_THROW(SynthConfig::from_json(R"({"files": 0})"), Error);
  EXPECT_THROW(SynthConfig::from_json(R"({"failure_weight": 1.5})"), Error);
  EXPECT_THROW(SynthConfig::from_json(R"({"colour": "red"})"), Error);
  EXPECT_EQ(SynthConfig::from_json(R"({"tests": 7})").tests, 7);
}

TEST(Synth, WeightZeroFailuresIgnoreChanges) {
  SynthConfig cfg;
  cfg.files = 80;
  cfg.tests = 40;
  cfg.builds = 60;
  cfg.failure_weight = 0.0;
  cfg.base_failure_rate = 0.05;
  // df = 1, alpha = 0.01
  EXPECT_LT(change_failure_chi_square(cfg, 11), 6.635);
  cfg.failure_weight = 0.8;
  EXPECT_GT(change_failure_chi_square(cfg, 11), 6.635);
}

TEST(Synth, OneFlakyTestIsTheThreeSigmaOutlier) {
  SynthConfig cfg;
  cfg.builds = 50;
  tcptest::TempDir dir;
  auto out = generate_synthetic_history(cfg, 7, dir / "ds");
  auto ds = load_dataset(out.layout.root);
  auto filtered = remove_frequent_failers(ds.history);
  ASSERT_EQ(filtered.removed.size(), 1u);
  ASSERT_EQ(out.truth.flaky_tests.size(), 1u);
  EXPECT_EQ(filtered.removed[0].path(), out.truth.flaky_tests[0]);
}

TEST(Synth, DriftRotatesCoverage) {
  auto cfg = small_config();
  cfg.drift_period = 5;
  tcptest::TempDir dir;
  auto out = generate_synthetic_history(cfg, 2, dir / "ds");
  ASSERT_EQ(out.truth.coverage_epochs.size(), 4u);
  EXPECT_EQ(out.truth.coverage_epochs[1].from_build, 6);
  EXPECT_NE(out.truth.coverage_epochs[0].coverage, out.truth.coverage_epochs[1].coverage);
}
