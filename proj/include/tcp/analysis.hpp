#pragma once

// Heuristic token-level analysis of Java-family sources (size, cyclomatic and
// OO metrics, dependency facts, unit spans) plus process and change metrics
// mined from commit history.

#include <array>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tcp/core.hpp"

namespace tcp {

enum class ComplexityMetric {
  CountDeclFunction,
  CountLine,
  CountLineBlank,
  CountLineCode,
  CountLineCodeDecl,
  CountLineCodeExe,
  CountLineComment,
  CountStmt,
  CountStmtDecl,
  CountStmtExe,
  RatioCommentToCode,
  MaxCyclomatic,
  MaxCyclomaticModified,
  MaxCyclomaticStrict,
  MaxEssential,
  MaxNesting,
  SumCyclomatic,
  SumCyclomaticModified,
  SumCyclomaticStrict,
  SumEssential,
  CountDeclClass,
  CountDeclClassMethod,
  CountDeclClassVariable,
  CountDeclExecutableUnit,
  CountDeclInstanceMethod,
  CountDeclInstanceVariable,
  CountDeclMethod,
  CountDeclMethodDefault,
  CountDeclMethodPrivate,
  CountDeclMethodProtected,
  CountDeclMethodPublic,
};
inline constexpr int kComplexityMetricCount = 31;

enum class ProcessMetric {
  CommitCount,
  DistinctDevCount,
  OwnersContribution,
  MinorContributorCount,
  OwnersExperience,
  AllCommitersExperience,
};
inline constexpr int kProcessMetricCount = 6;

enum class ChangeMetric {
  LinesAdded,
  LinesDeleted,
  AddedChangeScattering,
  DeletedChangeScattering,
  DMMUnitSize,
  DMMUnitComplexity,
  DMMUnitInterfacing,
};
inline constexpr int kChangeMetricCount = 7;

const std::array<std::string_view, kComplexityMetricCount>& complexity_metric_names();
const std::array<std::string_view, kProcessMetricCount>& process_metric_names();
const std::array<std::string_view, kChangeMetricCount>& change_metric_names();

/// Fixed-size metric vector indexed by one of the enums above.
template <class Metric, int N>
struct MetricVector {
  std::array<double, N> values{};
  double operator[](Metric m) const { return values[static_cast<std::size_t>(m)]; }
  double& operator[](Metric m) { return values[static_cast<std::size_t>(m)]; }
  friend bool operator==(const MetricVector&, const MetricVector&) = default;
};

using ComplexityMetrics = MetricVector<ComplexityMetric, kComplexityMetricCount>;
using ProcessMetrics = MetricVector<ProcessMetric, kProcessMetricCount>;
using ChangeMetrics = MetricVector<ChangeMetric, kChangeMetricCount>;

/// Low-risk thresholds per DMM property: a unit is low risk when its value
/// is at most the threshold.
struct RiskThresholds {
  int unit_size = 15;        // lines of code
  int unit_complexity = 5;   // cyclomatic
  int unit_interfacing = 2;  // parameters
};

/// A method, constructor or initializer body.
struct UnitSpan {
  int begin_line = 0;
  int end_line = 0;
  int size = 0;         // code lines inside the span
  int complexity = 1;   // cyclomatic
  int interfacing = 0;  // parameter count
  bool low_risk(DmmProperty p, const RiskThresholds& t = {}) const noexcept;
  friend bool operator==(const UnitSpan&, const UnitSpan&) = default;
};

struct ImportDecl {
  std::string name;  // dotted, without a trailing ".*"
  bool is_static = false;
  bool wildcard = false;
  friend bool operator==(const ImportDecl&, const ImportDecl&) = default;
};

/// Everything the analyzer can say about one file without looking at the
/// rest of the repository.
struct FileFacts {
  ComplexityMetrics metrics;
  std::string package;
  std::vector<ImportDecl> imports;
  std::vector<std::string> declared_types;
  std::set<std::string> referenced_types;  // capitalized identifiers outside imports
  std::vector<UnitSpan> units;
  friend bool operator==(const FileFacts&, const FileFacts&) = default;
};

FileFacts analyze_source(std::string_view source);

enum class FileKind { SutFile, TestFile };

/// `/test/` path segment, or a file name matching *Test.java / Test*.java.
bool is_test_path(std::string_view path);

struct SourceEntity {
  std::string path;
  FileKind kind = FileKind::SutFile;
  std::set<std::string> import_targets;
  std::set<std::string> call_targets;
  friend bool operator==(const SourceEntity&, const SourceEntity&) = default;
};

/// Extension table for files the analyzer accepts (".java" by default).
struct AnalyzerOptions {
  std::set<std::string> extensions{".java"};
  bool accepts(std::string_view path) const;
};

/// Name lookup over one repository snapshot.
class RepoIndex {
 public:
  void add(const std::string& path, const FileFacts& facts);
  void clear();
  SourceEntity resolve(const std::string& path, const FileFacts& facts) const;
  bool contains(const std::string& path) const { return files_.contains(path); }

 private:
  std::vector<std::string> lookup_qualified(std::string_view name) const;
  std::set<std::string> files_;
  std::map<std::string, std::set<std::string>, std::less<>> qualified_;  // pkg.Type -> files
  std::map<std::string, std::set<std::string>, std::less<>> by_package_;
  std::map<std::string, std::set<std::string>, std::less<>> by_type_;
  std::map<std::string, std::set<std::string>, std::less<>> types_of_file_;
};

/// Analysis of one file against a repository index.
std::pair<ComplexityMetrics, SourceEntity> analyze_file(std::string_view source,
                                                        const std::string& path,
                                                        const RepoIndex& index);

/// Line ranges touched by one file diff: (start, count) per hunk side.
struct HunkRange {
  int start = 0;
  int count = 0;
  friend bool operator==(const HunkRange&, const HunkRange&) = default;
};

/// Per-unit changed-line counts with each unit's risk flags. Added lines are
/// located in `new_units`, deleted lines in `old_units`; lines outside every
/// unit are ignored.
std::vector<UnitChange> unit_changes(const std::vector<UnitSpan>& old_units,
                                     const std::vector<UnitSpan>& new_units,
                                     const std::vector<HunkRange>& deleted,
                                     const std::vector<HunkRange>& added,
                                     const RiskThresholds& thresholds = {});

/// |CH| / C(|CH|, 2) * sum of pairwise distances; 0 for fewer than 2 chunks.
double change_scattering(std::vector<int> chunk_lines);

/// Share of changed lines (added plus deleted) falling in low-risk units for
/// one property; -1 when no changed line lies inside a unit.
double dmm(const std::vector<UnitChange>& changes, DmmProperty property);

ChangeMetrics compute_change_metrics(const std::string& path,
                                     const std::vector<FileChange>& build_changes);

/// Authorship state over a growing commit prefix.
class ProcessIndex {
 public:
  void add(const Commit& commit);
  ProcessMetrics metrics(const std::string& path) const;
  std::size_t commit_count() const noexcept { return commits_; }

 private:
  struct FileStats {
    int commits = 0;
    std::map<std::string, double> authored;  // author -> added + deleted lines
    std::set<std::string> authors;
  };
  std::unordered_map<std::string, FileStats> files_;
  std::map<std::string, double> project_authored_;
  double project_total_ = 0.0;
  std::size_t commits_ = 0;
};

/// Metrics for `path` over history[0..as_of]; all zeros when the file was
/// never touched. Throws UnresolvableRef when as_of is not in the history.
ProcessMetrics compute_process_metrics(const std::string& path, const std::vector<Commit>& history,
                                       const CommitId& as_of);

}  // namespace tcp
