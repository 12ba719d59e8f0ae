#pragma once

// Reads commits, trees and blobs from a git repository through the git CLI.
// Only committed objects are read; the working tree is never consulted.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tcp/analysis.hpp"
#include "tcp/core.hpp"

namespace tcp {

struct TreeEntry {
  std::string path;
  std::string blob;
};

class GitRepo {
 public:
  /// Throws RepoNotFound unless `path` is inside a git repository.
  explicit GitRepo(std::filesystem::path path);

  const std::filesystem::path& path() const noexcept { return path_; }
  /// True when the repository has no commits yet.
  bool empty() const;
  /// Full commit hash, or nullopt when `ref` does not name a commit.
  std::optional<std::string> resolve(const std::string& ref) const;

  /// First-parent history up to `until`, parents before children. Unit risk
  /// flags are filled for files `options` accepts.
  std::vector<Commit> log(const std::string& until, const AnalyzerOptions& options = {},
                          const RiskThresholds& thresholds = {}) const;

  std::vector<TreeEntry> tree(const std::string& commit) const;
  /// Blob contents by id; missing ids are absent from the result.
  std::map<std::string, std::string> read_blobs(const std::vector<std::string>& ids) const;

 private:
  std::vector<std::string> git_args(std::initializer_list<std::string> args) const;
  std::filesystem::path path_;
};

/// Errors: RepoNotFound, UnresolvableRef. An empty repository yields no commits.
std::vector<Commit> ingest_git_history(const std::filesystem::path& repo_path,
                                       const std::string& until = "HEAD");

}  // namespace tcp
