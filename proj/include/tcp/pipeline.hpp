#pragma once

// One chronological pass over a dataset: commits feed the co-change, process
// and PDF indexes, builds feed the execution index, and target builds get a
// repository snapshot plus their live inputs.

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <set>

#include "tcp/catalog.hpp"
#include "tcp/features.hpp"
#include "tcp/git.hpp"
#include "tcp/ingest.hpp"

namespace tcp {

enum class PrepStep { StaticAnalysis, CoChange, Graph, ProcessMining, Pdf, ExecIndex };
inline constexpr int kPrepStepCount = 6;
using StepSeconds = std::array<double, kPrepStepCount>;

/// Preprocessing seconds of a feature group: the full cost of every step it
/// depends on (shared steps are charged to each group).
double group_preprocessing(FeatureGroup group, const StepSeconds& steps);

struct PipelineOptions {
  RecWindow window;
  int impact_depth = 1;
  AnalyzerOptions analyzer;
  MessageClassifier classifier;  // keyword fallback when empty
};

struct PreparedBuild {
  LiveBuild live;
  std::shared_ptr<const Snapshot> snapshot;
  StepSeconds preprocessing{};
  GroupSeconds measurement{};  // REC and change-metric work done while preparing
};

class FeaturePipeline {
 public:
  /// `history` is the (possibly filtered) build list of `dataset`.
  FeaturePipeline(const Dataset& dataset, const BuildHistory& history, PipelineOptions options = {});

  /// Builds in `targets` without test records are skipped.
  std::map<BuildId, PreparedBuild> prepare(const std::set<BuildId>& targets);

  const PipelineOptions& options() const noexcept { return options_; }

 private:
  std::shared_ptr<const Snapshot> snapshot(BuildId build, const CommitId& head, const class CoChangeIndex& cochange,
                                           const ProcessIndex& process, const PdfTable& pdf, StepSeconds& steps);

  const Dataset& dataset_;
  const BuildHistory& history_;
  PipelineOptions options_;
  std::optional<GitRepo> repo_;
  std::unordered_map<std::string, std::shared_ptr<const FileFacts>> facts_;  // by blob id
};

}  // namespace tcp
