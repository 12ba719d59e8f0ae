#pragma once

// Fixtures and independent reference implementations shared by the unit
// tests and the acceptance runner. Nothing here calls into the code under
// test except to build inputs.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "tcp/classifier.hpp"
#include "tcp/core.hpp"
#include "tcp/process.hpp"

namespace tcptest {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("tcp_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// git with a fixed identity and clock so hashes are reproducible.
inline tcp::ProcessResult git(const fs::path& repo, std::vector<std::string> args,
                              const std::string& author = "Alice", std::int64_t when = 1600000000) {
  const std::string date = std::to_string(when) + " +0000";
  std::vector<std::string> argv = {"env",
                                   "GIT_AUTHOR_NAME=" + author,
                                   "GIT_AUTHOR_EMAIL=" + author + "@example.com",
                                   "GIT_COMMITTER_NAME=" + author,
                                   "GIT_COMMITTER_EMAIL=" + author + "@example.com",
                                   "GIT_AUTHOR_DATE=" + date,
                                   "GIT_COMMITTER_DATE=" + date,
                                   "git",
                                   "-C",
                                   repo.string(),
                                   "-c",
                                   "commit.gpgsign=false"};
  argv.insert(argv.end(), args.begin(), args.end());
  auto r = tcp::run_process(argv);
  if (r.exit_code != 0) throw std::runtime_error("git failed: " + r.err);
  return r;
}

inline void git_init(const fs::path& repo) {
  fs::create_directories(repo);
  git(repo, {"init", "-q"});
  git(repo, {"symbolic-ref", "HEAD", "refs/heads/main"});
}

inline std::string git_commit_all(const fs::path& repo, const std::string& message,
                                  const std::string& author = "Alice", std::int64_t when = 1600000000) {
  git(repo, {"add", "-A"}, author, when);
  git(repo, {"commit", "-q", "--allow-empty", "-m", message}, author, when);
  auto head = git(repo, {"rev-parse", "HEAD"}).out;
  while (!head.empty() && (head.back() == '\n' || head.back() == '\r')) head.pop_back();
  return head;
}

inline tcp::ExecutionRecord record(std::int64_t build, const std::string& test, bool failed, double ms) {
  return {tcp::BuildId{build}, tcp::TestId(test), failed ? tcp::Verdict::AssertionFailure : tcp::Verdict::Passed,
          ms};
}

// ---------------------------------------------------------------------------
// Oracles

// Cost-cognizant APFD straight from its definition: for each failing test
// i (rank TF_i), the cost from TF_i to the end minus half of t_TF_i.
inline double apfdc_reference(const std::vector<bool>& failed, const std::vector<double>& costs) {
  const std::size_t n = failed.size();
  std::vector<double> t = costs;
  if (std::all_of(t.begin(), t.end(), [](double c) { return c == 0.0; })) std::fill(t.begin(), t.end(), 1.0);
  double total = 0.0;
  for (double c : t) total += c;
  double numerator = 0.0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!failed[i]) continue;
    ++m;
    double tail = 0.0;
    for (std::size_t j = i; j < n; ++j) tail += t[j];
    numerator += tail - t[i] / 2.0;
  }
  return numerator / (total * static_cast<double>(m));
}

// Support, confidence and lift by scanning the change list pair by pair.
struct PairCounts {
  int total = 0;  // change sets with at least one file
  int f = 0;
  int g = 0;
  int both = 0;
};

inline PairCounts brute_force_counts(const std::vector<std::set<std::string>>& changes, const std::string& f,
                                     const std::string& g) {
  PairCounts c;
  for (const auto& s : changes) {
    if (s.empty()) continue;
    ++c.total;
    const bool hf = s.count(f) > 0;
    const bool hg = s.count(g) > 0;
    c.f += hf;
    c.g += hg;
    c.both += hf && hg;
  }
  return c;
}

inline double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Mann-Whitney form of the area under the ROC curve.
inline double auc(const std::vector<double>& scores, const std::vector<double>& labels) {
  double pairs = 0.0;
  double wins = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = 0; j < scores.size(); ++j)
      if (labels[i] > 0.5 && labels[j] < 0.5) {
        pairs += 1.0;
        wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
      }
  return pairs > 0 ? wins / pairs : 0.0;
}

// ---------------------------------------------------------------------------
// Keyword-separable commit corpus: every DefectFix message carries "fix" or
// "bug", no NonDefect message carries either.

inline std::vector<tcp::LabeledMessage> keyword_corpus(std::size_t n = 500, std::uint32_t seed = 11) {
  static const std::vector<std::string> subjects = {"parser",   "cache",  "login page", "scheduler", "exporter",
                                                    "settings", "router", "database",   "renderer",  "uploader",
                                                    "metrics",  "auth",   "queue",      "index",     "session"};
  static const std::vector<std::string> neutral = {"add",     "refactor", "update", "document", "rename",
                                                   "improve", "extend",   "move",   "clean up", "optimize"};
  static const std::vector<std::string> defect = {"fix", "fixed", "fixes", "bug in", "bugfix for", "fix bug in"};
  static const std::vector<std::string> tails = {"",           " for release", " in module", " after review",
                                                 " (see #42)", " and tests",   " again"};
  std::mt19937 rng(seed);
  auto pick = [&](const std::vector<std::string>& v) { return v[rng() % v.size()]; };
  std::vector<tcp::LabeledMessage> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool fix = i % 5 < 2;  // 40% defect fixes
    std::string msg = (fix ? pick(defect) : pick(neutral)) + " " + pick(subjects) + pick(tails);
    out.push_back({msg, fix ? tcp::CommitClass::DefectFix : tcp::CommitClass::NonDefect});
  }
  return out;
}

}  // namespace tcptest
