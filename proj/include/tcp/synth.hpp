#pragma once

// Synthetic CI histories: a generated Java repository, builds with commits,
// and per-test verdicts drawn from a coverage-driven failure model. The hidden
// ground truth is written next to the dataset for oracle checks.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tcp/ingest.hpp"

namespace tcp {

struct SynthConfig {
  int files = 200;
  int tests = 100;
  int builds = 60;
  int packages = 10;
  int min_commits_per_build = 1;
  int max_commits_per_build = 3;
  int min_files_per_commit = 1;
  int max_files_per_commit = 4;
  int min_coverage = 1;  // SUT files truly exercised per test
  int max_coverage = 3;
  double test_cochange = 0.3;     // chance a covering test is edited with its SUT file
  double failure_weight = 0.8;    // per covered changed file
  double age_boost = 0.5;         // young tests fail up to (1 + boost) times as often
  double age_scale = 10.0;        // builds
  double base_failure_rate = 0.003;
  int flaky_count = 1;
  double flaky_failure_rate = 0.9;
  double late_test_fraction = 0.2;
  int drift_period = 0;  // rotate true coverage every N builds; 0 = never
  int drift_stride = 17;
  double duration_log_mean = 7.0;  // log milliseconds
  double duration_log_sd = 1.0;
  double duration_noise_sd = 0.1;
  double second_job_probability = 0.2;
  double fix_probability = 0.8;  // a fault is followed by a fix commit

  /// Throws InvalidConfig for non-positive counts or rates outside [0, 1].
  void validate() const;
  /// Unknown keys are rejected; missing keys keep their defaults.
  static SynthConfig from_json(std::string_view text);
  static SynthConfig load(const std::filesystem::path& path);
  std::string to_json() const;
};

struct GroundTruth {
  struct Epoch {
    std::int64_t from_build = 1;
    std::map<std::string, std::vector<std::string>> coverage;  // test path -> SUT paths
  };
  std::vector<Epoch> coverage_epochs;
  std::map<std::int64_t, std::vector<std::string>> fault_builds;  // failures caused by changes
  std::vector<std::string> flaky_tests;

  std::string to_json() const;
};

struct SynthResult {
  DatasetLayout layout;
  GroundTruth truth;
};

/// Writes builds.csv, exec_records.csv, commits.jsonl, dataset.json,
/// ground_truth.json and repo/ under `out`, which must be absent or empty.
SynthResult generate_synthetic_history(const SynthConfig& config, std::uint64_t seed,
                                       const std::filesystem::path& out);

}  // namespace tcp
