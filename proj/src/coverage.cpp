#include "tcp/coverage.hpp"

#include <algorithm>
#include <deque>

#include <fmt/format.h>

#include "json_io.hpp"

namespace tcp {

void CoChangeIndex::add(const Commit& commit) {
  std::set<std::string> files;
  for (const auto& fc : commit.file_changes) files.insert(fc.path);
  add(files);
}

void CoChangeIndex::add(const std::set<std::string>& changed_files) {
  if (changed_files.empty()) return;
  const auto id = static_cast<std::uint32_t>(commits_++);
  for (const auto& f : changed_files) postings_[f].push_back(id);
}

const std::vector<std::uint32_t>* CoChangeIndex::postings(const std::string& f) const {
  auto it = postings_.find(f);
  return it == postings_.end() ? nullptr : &it->second;
}

int CoChangeIndex::count(const std::string& f) const {
  const auto* p = postings(f);
  return p ? static_cast<int>(p->size()) : 0;
}

int CoChangeIndex::pair_count(const std::string& f, const std::string& g) const {
  const auto* a = postings(f);
  const auto* b = postings(g);
  if (!a || !b) return 0;
  if (f == g) return static_cast<int>(a->size());
  int n = 0;
  auto i = a->begin();
  auto j = b->begin();
  while (i != a->end() && j != b->end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

AssociationScores CoChangeIndex::scores(const std::string& f, const std::string& g) const {
  AssociationScores s;
  const int p = pair_count(f, g);
  if (p == 0) return s;
  const double cf = count(f);
  const double cg = count(g);
  s.support = static_cast<double>(p) / static_cast<double>(commits_);
  s.confidence = p / cf;
  s.lift = p / (cf * cg);
  return s;
}

AssociationScores association_scores(const std::vector<Commit>& history, const std::string& f,
                                     const std::string& g) {
  CoChangeIndex index;
  for (const auto& c : history) index.add(c);
  return index.scores(f, g);
}

void DependencyGraph::add_node(const std::string& path, FileKind kind) { nodes_[path] = kind; }

void DependencyGraph::add_edge(const std::string& from, const std::string& to,
                               const AssociationScores& scores, double reverse_confidence) {
  if (from == to) return;
  if (!nodes_.contains(from) || !nodes_.contains(to))
    throw Error(Errc::Invariant, fmt::format("edge {} -> {} has an unknown endpoint", from, to));
  auto [it, inserted] = out_[from].insert_or_assign(to, scores);
  (void)it;
  if (inserted) ++edge_count_;
  reverse_[from][to] = reverse_confidence;
  in_[to].insert(from);
}

FileKind DependencyGraph::kind(const std::string& path) const {
  auto it = nodes_.find(path);
  if (it == nodes_.end()) throw Error(Errc::UnknownTest, "unknown node " + path);
  return it->second;
}

const std::map<std::string, AssociationScores>& DependencyGraph::out_edges(const std::string& from) const {
  static const std::map<std::string, AssociationScores> none;
  auto it = out_.find(from);
  return it == out_.end() ? none : it->second;
}

const std::set<std::string>& DependencyGraph::in_edges(const std::string& to) const {
  static const std::set<std::string> none;
  auto it = in_.find(to);
  return it == in_.end() ? none : it->second;
}

const AssociationScores* DependencyGraph::edge(const std::string& from, const std::string& to) const {
  auto it = out_.find(from);
  if (it == out_.end()) return nullptr;
  auto e = it->second.find(to);
  return e == it->second.end() ? nullptr : &e->second;
}

double DependencyGraph::reverse_confidence(const std::string& from, const std::string& to) const {
  auto it = reverse_.find(from);
  if (it == reverse_.end()) return 0.0;
  auto e = it->second.find(to);
  return e == it->second.end() ? 0.0 : e->second;
}

std::string DependencyGraph::to_json() const {
  using detail::json;
  json nodes = json::array();
  json tests = json::array();
  for (const auto& [path, kind] : nodes_) {
    nodes.push_back(path);
    if (kind == FileKind::TestFile) tests.push_back(path);
  }
  json edges = json::array();
  for (const auto& [from, targets] : out_)
    for (const auto& [to, s] : targets)
      edges.push_back({{"from", from},
                       {"to", to},
                       {"support", s.support},
                       {"confidence", s.confidence},
                       {"lift", s.lift},
                       {"reverse_confidence", reverse_confidence(from, to)}});
  json doc = {{"built_at", built_at.ordinal}, {"nodes", nodes}, {"tests", tests}, {"edges", edges}};
  return doc.dump(1);
}

DependencyGraph build_dependency_graph(const std::vector<SourceEntity>& entities,
                                       const CoChangeIndex& cochange, BuildId as_of) {
  DependencyGraph g;
  g.built_at = as_of;
  for (const auto& e : entities) g.add_node(e.path, e.kind);
  for (const auto& e : entities) {
    std::set<std::string> targets = e.import_targets;
    targets.insert(e.call_targets.begin(), e.call_targets.end());
    for (const auto& t : targets)
      if (g.has_node(t)) g.add_edge(e.path, t, cochange.scores(e.path, t), cochange.scores(t, e.path).confidence);
  }
  return g;
}

DependencyGraph build_dependency_graph(const std::vector<SourceEntity>& entities,
                                       const std::vector<Commit>& history, BuildId as_of) {
  CoChangeIndex index;
  for (const auto& c : history) index.add(c);
  return build_dependency_graph(entities, index, as_of);
}

std::set<std::string> covered_files(const DependencyGraph& graph, const TestId& test) {
  if (!graph.has_node(test.path())) throw Error(Errc::UnknownTest, "test not in graph: " + test.path());
  std::set<std::string> out;
  for (const auto& [to, s] : graph.out_edges(test.path()))
    if (graph.kind(to) == FileKind::SutFile) out.insert(to);
  return out;
}

double cov_score(const DependencyGraph& graph, const std::string& f, const TestId& t) {
  return graph.reverse_confidence(t.path(), f);
}

std::set<std::string> impacted_files(const DependencyGraph& graph, const std::set<std::string>& changed,
                                     int depth) {
  if (depth < 1) throw Error(Errc::InvalidConfig, "impact depth must be at least 1");
  std::set<std::string> seen(changed.begin(), changed.end());
  std::vector<std::string> frontier(changed.begin(), changed.end());
  std::set<std::string> out;
  for (int d = 0; d < depth && !frontier.empty(); ++d) {
    std::vector<std::string> next;
    for (const auto& f : frontier)
      for (const auto& dependent : graph.in_edges(f))
        if (seen.insert(dependent).second) {
          out.insert(dependent);
          next.push_back(dependent);
        }
    frontier = std::move(next);
  }
  return out;
}

int PdfTable::operator[](const std::string& path) const {
  auto it = counts.find(path);
  return it == counts.end() ? 0 : it->second;
}

void PdfTable::add(const Commit& commit, CommitClass cls) {
  if (cls != CommitClass::DefectFix) return;
  std::set<std::string> files;
  for (const auto& fc : commit.file_changes) files.insert(fc.path);
  for (const auto& f : files) ++counts[f];
}

PdfTable compute_pdf(const std::vector<Commit>& history, const MessageClassifier& classifier) {
  PdfTable t;
  for (const auto& c : history) t.add(c, classifier(c.message));
  return t;
}

PdfTable compute_pdf(const std::vector<Commit>& history, const MessageClassifier& classifier,
                     const CommitId& as_of) {
  auto end = std::find_if(history.begin(), history.end(), [&](const Commit& c) { return c.id == as_of; });
  if (end == history.end())
    throw Error(Errc::UnresolvableRef, fmt::format("commit {} is not in the history", as_of));
  PdfTable t;
  for (auto it = history.begin(); it <= end; ++it) t.add(*it, classifier(it->message));
  return t;
}

std::vector<double> normalize_scores(const std::vector<double>& scores) {
  double sum = 0.0;
  for (double s : scores) sum += s;
  std::vector<double> out(scores.size(), 0.0);
  if (sum <= 0.0) return out;
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] / sum;
  return out;
}

}  // namespace tcp
