#pragma once

// Dataset layout on disk: builds.csv, exec_records.csv and either a git
// repository or commits.jsonl. Loads them into a BuildHistory plus the commit
// list, and writes them back.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tcp/analysis.hpp"
#include "tcp/core.hpp"

namespace tcp {

struct DatasetLayout {
  std::filesystem::path root;
  std::optional<std::filesystem::path> repo;  // absolute, when configured

  /// Reads dataset.json ({"repo": "<path relative to root>"}) when present;
  /// otherwise uses root/repo if it exists.
  static DatasetLayout open(const std::filesystem::path& root);

  std::filesystem::path builds_csv() const { return root / "builds.csv"; }
  std::filesystem::path exec_records_csv() const { return root / "exec_records.csv"; }
  std::filesystem::path commits_jsonl() const { return root / "commits.jsonl"; }
  std::filesystem::path dataset_json() const { return root / "dataset.json"; }
};

/// "YYYY-MM-DDTHH:MM:SS" with optional fractional seconds and Z/±HH:MM.
/// Throws SchemaError on malformed input.
std::int64_t parse_iso8601(std::string_view text);
std::string format_iso8601(std::int64_t seconds);

using JobRecords = std::map<std::string, std::vector<ExecutionRecord>>;

/// Job with the most distinct tests; ties go to the smallest job id.
/// Throws EmptyBuild when `jobs` is empty.
std::string select_primary_job(const JobRecords& jobs);

/// Builds from builds.csv with their commit lists and the primary job's
/// records (sorted by test). Changed files are left empty.
/// Errors: SchemaError (with row number), DuplicateRecord.
BuildHistory ingest_exec_records(const DatasetLayout& layout);

std::vector<Commit> read_commits_jsonl(const std::filesystem::path& path);
void write_commits_jsonl(const std::filesystem::path& path, const std::vector<Commit>& commits);

/// Writes builds.csv and exec_records.csv (job id "primary").
void write_history(const DatasetLayout& layout, const BuildHistory& history);
void write_dataset_json(const DatasetLayout& layout);

struct Dataset {
  DatasetLayout layout;
  BuildHistory history;
  std::vector<Commit> commits;                             // history order
  std::unordered_map<CommitId, std::size_t> commit_index;  // position in `commits`

  const Commit& commit(const CommitId& id) const;
};

struct LoadOptions {
  AnalyzerOptions analyzer;
  RiskThresholds thresholds;
};

/// Loads records and commits (commits.jsonl when present, else the repo's
/// HEAD history) and fills each build's changed files from its commits.
/// Throws SchemaError when a build names an unknown commit.
Dataset load_dataset(const std::filesystem::path& root, const LoadOptions& options = {});

}  // namespace tcp
