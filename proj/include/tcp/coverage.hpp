#pragma once

// File-level dependency graph weighted by co-change association rules, plus
// covered/impacted sets, PDF counts and score normalisation.

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tcp/analysis.hpp"
#include "tcp/classifier.hpp"
#include "tcp/core.hpp"

namespace tcp {

/// Per-file postings of the commits (with at least one changed file) that
/// touched it. p_cnt is a postings intersection.
class CoChangeIndex {
 public:
  void add(const Commit& commit);
  void add(const std::set<std::string>& changed_files);

  std::size_t commits() const noexcept { return commits_; }
  int count(const std::string& f) const;
  int pair_count(const std::string& f, const std::string& g) const;
  /// support = p_cnt/|CH|, confidence = p_cnt/cnt(f), lift = p_cnt/(cnt(f)cnt(g));
  /// zero wherever a denominator is zero.
  AssociationScores scores(const std::string& f, const std::string& g) const;

 private:
  const std::vector<std::uint32_t>* postings(const std::string& f) const;
  std::unordered_map<std::string, std::vector<std::uint32_t>> postings_;
  std::size_t commits_ = 0;
};

AssociationScores association_scores(const std::vector<Commit>& history, const std::string& f,
                                     const std::string& g);

class DependencyGraph {
 public:
  BuildId built_at;

  void add_node(const std::string& path, FileKind kind);
  /// Self-edges are ignored; endpoints must already be nodes. `scores` are
  /// scores(from, to); `reverse_confidence` is confidence(to, from), the
  /// chance that `from` changes when `to` does.
  void add_edge(const std::string& from, const std::string& to, const AssociationScores& scores,
                double reverse_confidence);

  bool has_node(const std::string& path) const { return nodes_.contains(path); }
  FileKind kind(const std::string& path) const;
  const std::map<std::string, FileKind>& nodes() const noexcept { return nodes_; }
  const std::map<std::string, AssociationScores>& out_edges(const std::string& from) const;
  const std::set<std::string>& in_edges(const std::string& to) const;
  const AssociationScores* edge(const std::string& from, const std::string& to) const;
  /// confidence(to, from) of an existing edge, else 0.
  double reverse_confidence(const std::string& from, const std::string& to) const;
  std::size_t edge_count() const noexcept { return edge_count_; }

  /// {"built_at", "nodes":[...], "tests":[...],
  ///  "edges":[{from,to,support,confidence,lift,reverse_confidence}]}
  std::string to_json() const;

 private:
  std::map<std::string, FileKind> nodes_;
  std::map<std::string, std::map<std::string, AssociationScores>> out_;
  std::map<std::string, std::map<std::string, double>> reverse_;
  std::map<std::string, std::set<std::string>> in_;
  std::size_t edge_count_ = 0;
};

DependencyGraph build_dependency_graph(const std::vector<SourceEntity>& entities,
                                       const CoChangeIndex& cochange, BuildId as_of);
DependencyGraph build_dependency_graph(const std::vector<SourceEntity>& entities,
                                       const std::vector<Commit>& history, BuildId as_of);

/// SUT files the test depends on. Throws UnknownTest when absent.
std::set<std::string> covered_files(const DependencyGraph& graph, const TestId& test);

/// confidence(f, t) = p_cnt(f, t)/cnt(f) when the edge t -> f exists, else 0.
double cov_score(const DependencyGraph& graph, const std::string& f, const TestId& t);

/// Files reaching `changed` over at most `depth` dependency edges, minus
/// `changed`.
std::set<std::string> impacted_files(const DependencyGraph& graph, const std::set<std::string>& changed,
                                     int depth = 1);

using MessageClassifier = std::function<CommitClass(std::string_view)>;

/// Defect-fix commit count per file.
struct PdfTable {
  std::map<std::string, int> counts;
  int operator[](const std::string& path) const;
  void add(const Commit& commit, CommitClass cls);
  friend bool operator==(const PdfTable&, const PdfTable&) = default;
};

PdfTable compute_pdf(const std::vector<Commit>& history, const MessageClassifier& classifier);
/// Over commits up to and including `as_of`; UnresolvableRef when absent.
PdfTable compute_pdf(const std::vector<Commit>& history, const MessageClassifier& classifier,
                     const CommitId& as_of);

/// Each score over the sum; all zeros when the sum is zero.
std::vector<double> normalize_scores(const std::vector<double>& scores);

}  // namespace tcp
