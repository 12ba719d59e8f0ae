#pragma once

// Domain types shared by every module: builds, tests, verdicts, commits and
// the change sets that link them.

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tcp {

/// Error categories; each maps onto one CLI exit code.
enum class Errc {
  SchemaError,
  DuplicateRecord,
  RepoNotFound,
  UnresolvableRef,
  EmptyBuild,
  InvalidConfig,
  DegenerateCorpus,
  UnknownTest,
  UnknownFeature,
  CatalogMismatch,
  NoFailedBuilds,
  NoFailures,
  InsufficientHistory,
  Io,
  Invariant,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// 2 = input/schema error, 3 = insufficient history, 4 = invariant violation.
int exit_code_for(Errc code) noexcept;
std::string_view errc_name(Errc code) noexcept;

/// Build ordinal, monotone in time.
struct BuildId {
  std::int64_t ordinal = 0;
  friend auto operator<=>(const BuildId&, const BuildId&) = default;
};

/// A regression test, identified by the repository-relative path of its
/// source file.
class TestId {
 public:
  TestId() = default;
  explicit TestId(std::string path);
  const std::string& path() const noexcept { return path_; }
  friend auto operator<=>(const TestId&, const TestId&) = default;

 private:
  std::string path_;
};

using CommitId = std::string;

enum class Verdict { Passed, AssertionFailure, ExceptionFailure, UnknownFailure };

constexpr bool is_failed(Verdict v) noexcept { return v != Verdict::Passed; }

/// Numeric code used in exec_records.csv (0 pass, 1 assertion, 2 exception, 3 unknown).
Verdict verdict_from_code(int code);
int verdict_code(Verdict v) noexcept;

struct ExecutionRecord {
  BuildId build;
  TestId test;
  Verdict verdict = Verdict::Passed;
  double duration_ms = 0.0;
  friend bool operator==(const ExecutionRecord&, const ExecutionRecord&) = default;
};

/// Low-risk flags of a changed unit, indexed by DmmProperty.
enum class DmmProperty { UnitSize = 0, UnitComplexity = 1, UnitInterfacing = 2 };
inline constexpr int kDmmProperties = 3;

/// Lines added to (post-change unit) or deleted from (pre-change unit) one
/// method, with the unit's risk classification on each DMM property.
struct UnitChange {
  bool low_risk[kDmmProperties] = {true, true, true};
  int added = 0;
  int deleted = 0;
  friend bool operator==(const UnitChange& a, const UnitChange& b) {
    return a.low_risk[0] == b.low_risk[0] && a.low_risk[1] == b.low_risk[1] &&
           a.low_risk[2] == b.low_risk[2] && a.added == b.added && a.deleted == b.deleted;
  }
};

struct FileChange {
  std::string path;
  int lines_added = 0;
  int lines_deleted = 0;
  std::vector<int> added_chunks;    // start lines in the post-change file
  std::vector<int> deleted_chunks;  // start lines in the pre-change file
  std::vector<UnitChange> unit_changes;
  friend bool operator==(const FileChange&, const FileChange&) = default;
};

struct Commit {
  CommitId id;
  std::int64_t timestamp = 0;  // seconds since epoch
  std::string author;
  std::string message;
  std::vector<FileChange> file_changes;
  friend bool operator==(const Commit&, const Commit&) = default;
};

/// chn(b) and imp(b) of one build; the two sets are disjoint.
struct ChangeSet {
  BuildId build;
  std::vector<CommitId> commits;
  std::set<std::string> changed_files;
  std::set<std::string> impacted_files;
  friend bool operator==(const ChangeSet&, const ChangeSet&) = default;
};

struct Build {
  BuildId id;
  ChangeSet change_set;
  std::vector<ExecutionRecord> records;
  std::optional<std::int64_t> wall_clock;

  bool failed() const noexcept;
  std::vector<TestId> tests() const;  // sorted, distinct
  friend bool operator==(const Build&, const Build&) = default;
};

/// Builds sorted by ordinal.
struct BuildHistory {
  std::vector<Build> builds;

  const Build* find(BuildId id) const noexcept;
  std::optional<std::size_t> position(BuildId id) const noexcept;
  friend bool operator==(const BuildHistory&, const BuildHistory&) = default;
};

/// Throws Errc::Invariant if builds are unsorted, ids repeat, a (build, test)
/// pair repeats, or chn/imp overlap.
void check_invariants(const BuildHistory& history);

struct AssociationScores {
  double support = 0.0;
  double confidence = 0.0;
  double lift = 0.0;
  friend bool operator==(const AssociationScores&, const AssociationScores&) = default;
};

}  // namespace tcp

template <>
struct std::hash<tcp::TestId> {
  std::size_t operator()(const tcp::TestId& t) const noexcept {
    return std::hash<std::string>{}(t.path());
  }
};
