#pragma once

// The 150-value feature vector per (build, test): execution-record features
// from an incremental index, test-file metrics and coverage-weighted metric
// sums from a per-build snapshot.

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "tcp/analysis.hpp"
#include "tcp/catalog.hpp"
#include "tcp/core.hpp"
#include "tcp/coverage.hpp"

namespace tcp {

struct RecWindow {
  int recent_size = 6;
};

inline constexpr int kRecFeatureCount = 19;
using RecValues = std::array<double, kRecFeatureCount>;

/// Execution outcomes of every build added so far. Builds are identified by
/// their position in the full history, so ages count builds.
class ExecutionIndex {
 public:
  explicit ExecutionIndex(RecWindow window = {});

  /// REC values for `test` at the build at `position` with changed files
  /// `changed`, from the builds added so far (all earlier than `position`).
  RecValues features(const TestId& test, std::size_t position, const std::set<std::string>& changed) const;

  /// Appends the outcomes of `build`. A test that reappears after missing
  /// from a build that ran tests starts a new age.
  void add(const Build& build, std::size_t position);

  bool known(const TestId& test) const { return tests_.contains(test); }

 private:
  struct Run {
    bool failed;
    Verdict verdict;
    double duration;
  };
  struct TestState {
    std::vector<Run> runs;
    std::size_t first_position = 0;
    std::size_t last_position = 0;
    std::optional<std::size_t> last_fail;
    std::optional<std::size_t> last_transition;
    int fail_builds = 0;
    int transition_builds = 0;
    std::unordered_map<std::string, int> fail_with_file;        // TFF
    std::unordered_map<std::string, int> transition_with_file;  // TFT
  };
  RecWindow window_;
  std::unordered_map<TestId, TestState> tests_;
  std::vector<std::size_t> run_positions_;  // builds that executed tests
};

/// Static state of the repository as of one build.
struct Snapshot {
  BuildId build;
  CommitId commit;  // empty before the first commit
  DependencyGraph graph;
  std::unordered_map<std::string, ComplexityMetrics> complexity;
  std::unordered_map<std::string, ProcessMetrics> process;
  PdfTable pdf;
};

/// Per-build inputs that never come from a snapshot.
struct LiveBuild {
  BuildId build;
  std::vector<TestId> tests;  // sorted
  std::vector<RecValues> rec;
  std::set<std::string> changed;
  std::map<std::string, ChangeMetrics> change;  // per changed file
};

struct FeatureVector {
  BuildId build;
  TestId test;
  std::array<double, kFeatureCount> values{};
};

struct FeatureMatrix {
  BuildId build;
  std::vector<FeatureVector> rows;  // by TestId
  std::uint64_t catalog_fingerprint = FeatureCatalog::standard().fingerprint();
};

/// Measurement seconds per feature group, indexed by FeatureGroup.
using GroupSeconds = std::array<double, kFeatureGroupCount>;

struct AssembleOptions {
  int impact_depth = 1;
  /// Tests absent from the snapshot get the mean of known rows for every
  /// snapshot-derived feature instead of zeros.
  bool impute_unknown = false;
};

FeatureMatrix assemble_feature_matrix(const LiveBuild& live, const Snapshot& snapshot,
                                      const AssembleOptions& options = {},
                                      GroupSeconds* measurement = nullptr);

/// Header `build_id,test_path,<150 names>`.
void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& matrix);
FeatureMatrix read_feature_csv(const std::filesystem::path& path);

}  // namespace tcp
