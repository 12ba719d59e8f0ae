#pragma once

// Orderings scored with APFD_C, frequent-failer filtering, the per-build
// train/predict evaluation, the retraining-window decay experiment and the
// per-group timing report.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tcp/catalog.hpp"
#include "tcp/ingest.hpp"
#include "tcp/pipeline.hpp"
#include "tcp/ranker.hpp"

namespace tcp {

/// Failed tests first, then passed; each tier by duration ascending, then TestId.
Ordering optimal_ordering(const Build& build);

/// APFD_C of tests given in rank order. All-zero durations count as unit
/// costs. Throws NoFailures when nothing failed.
double apfdc(const std::vector<bool>& failed, const std::vector<double>& durations);
/// Tests of `order` missing from the build are ignored; build tests missing
/// from `order` are an Invariant error.
double apfdc(const std::vector<TestId>& order, const Build& build);

/// Mean + 3 sample standard deviations.
double three_sigma_threshold(const std::vector<double>& counts);

struct FilteredHistory {
  BuildHistory history;
  std::vector<TestId> removed;
  double threshold = 0.0;
};

/// One pass: tests whose failure count exceeds the threshold lose all their
/// records. Histories with fewer than two executed tests pass through.
FilteredHistory remove_frequent_failers(const BuildHistory& history);

struct EvalOptions {
  Hyperparams hyperparams;
  PipelineOptions pipeline;
  int max_failed_builds = 50;  // latest failed builds evaluated
  std::vector<std::pair<std::string, Direction>> heuristics = {{"F_FailRate_Total", Direction::Descending}};
  int jobs = 1;
};

struct ApfdcRecord {
  BuildId build;
  std::string strategy;
  double value = 0.0;
};

struct TimingRow {
  FeatureGroup group;
  double preprocessing = 0.0;  // mean seconds per build
  double measurement = 0.0;
  double total() const { return preprocessing + measurement; }
};

struct StrategySummary {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t builds = 0;
};

struct DecayPoint {
  int rw = 0;
  double mean_apfdc = 0.0;
  std::size_t pairs = 0;
};

struct EvaluationReport {
  std::vector<ApfdcRecord> apfdc;
  std::map<std::string, StrategySummary> summary;
  double expected_random = 0.5;
  std::vector<TimingRow> timing;
  std::vector<TestId> removed_tests;
  double removal_threshold = 0.0;
  std::vector<std::pair<std::string, int>> feature_usage;  // summed over all trained models
  std::vector<DecayPoint> decay;                           // filled by the decay experiment
  std::vector<ApfdcRecord> decay_pairs;                    // strategy = "rw=<n>,model=<k>"
};

/// Strategy names used in reports.
inline constexpr const char* kFullStrategy = "full";
inline constexpr const char* kOptimalStrategy = "optimal";
inline constexpr const char* kRandomStrategy = "random";
std::string heuristic_strategy(const std::string& feature, Direction d);

/// Runs the evaluation and, when `with_decay` is set, the decay experiment
/// over the same trained models. Throws InsufficientHistory with fewer than
/// two failed builds after filtering.
EvaluationReport run_pipeline_eval(const Dataset& dataset, const EvalOptions& options, bool with_decay = false);

/// Decay curve only (the report carries the same per-build evaluation).
EvaluationReport decay_experiment(const Dataset& dataset, const EvalOptions& options);

/// Least-squares slope of mean APFD_C over rw in [lo, hi].
double decay_slope(const std::vector<DecayPoint>& curve, int lo, int hi);

/// Per-group mean P and M over prepared builds.
std::vector<TimingRow> timing_report(const std::vector<StepSeconds>& preprocessing,
                                     const std::vector<GroupSeconds>& measurement);

void write_apfdc_csv(const std::filesystem::path& path, const EvaluationReport& report);
void write_timing_csv(const std::filesystem::path& path, const EvaluationReport& report);
void write_decay_csv(const std::filesystem::path& path, const EvaluationReport& report);
/// Summary, configuration echo and feature usage.
void write_report_json(const std::filesystem::path& path, const EvaluationReport& report, const std::string& config_json);

}  // namespace tcp
