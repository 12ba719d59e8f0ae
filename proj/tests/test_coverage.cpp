#include <random>

#include <gtest/gtest.h>

#include "json.hpp"
#include "support.hpp"
#include "tcp/coverage.hpp"

using namespace tcp;
using Files = std::set<std::string>;

namespace {

std::vector<Commit> history_of(const std::vector<Files>& changes) {
  std::vector<Commit> out;
  for (std::size_t i = 0; i < changes.size(); ++i) {
    Commit c;
    c.id = "c" + std::to_string(i);
    c.author = "ann";
    for (const auto& f : changes[i]) {
      FileChange fc;
      fc.path = f;
      fc.lines_added = 1;
      c.file_changes.push_back(fc);
    }
    out.push_back(c);
  }
  return out;
}

SourceEntity entity(const std::string& path, FileKind kind, Files imports = {}) {
  SourceEntity e;
  e.path = path;
  e.kind = kind;
  e.import_targets = std::move(imports);
  return e;
}

const std::vector<Files> kPaperChanges = {{"f1", "f2", "f3"}, {"f1", "f3"}, {"f2"}, {"f1", "f2", "f3", "f4"}};

}  // namespace

TEST(Association, PaperChangeList) {
  auto s = association_scores(history_of(kPaperChanges), "f1", "f3");
  EXPECT_EQ(s.support, 0.75);
  EXPECT_EQ(s.confidence, 1.0);
  EXPECT_DOUBLE_EQ(s.lift, 1.0 / 3.0);
}

TEST(Association, NeverChangedAndAlwaysTogether) {
  auto h = history_of({{"f", "g"}, {"f", "g"}, {"f", "g"}, {"f", "g"}});
  EXPECT_EQ(association_scores(h, "x", "f"), AssociationScores{});
  auto s = association_scores(h, "f", "g");
  EXPECT_EQ(s.support, 1.0);
  EXPECT_EQ(s.confidence, 1.0);
  EXPECT_EQ(s.lift, 0.25);
}

TEST(Association, EmptyCommitsDoNotCount) {
  auto h = history_of({{"f", "g"}, {}, {"f"}});
  auto s = association_scores(h, "f", "g");
  EXPECT_EQ(s.support, 0.5);
  EXPECT_EQ(s.confidence, 0.5);
}

TEST(Association, SymmetryAndAsymmetry) {
  auto h = history_of({{"a", "b"}, {"a"}, {"a", "c"}, {"b"}, {"a", "b"}});
  auto ab = association_scores(h, "a", "b");
  auto ba = association_scores(h, "b", "a");
  EXPECT_EQ(ab.support, ba.support);
  EXPECT_EQ(ab.lift, ba.lift);
  EXPECT_DOUBLE_EQ(ab.confidence, 2.0 / 4.0);
  EXPECT_DOUBLE_EQ(ba.confidence, 2.0 / 3.0);
}

TEST(Association, RandomHistoriesMatchBruteForce) {
  std::mt19937 rng(2024);
  const std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Files> changes(1 + rng() % 12);
    for (auto& s : changes)
      for (const auto& f : pool)
        if (rng() % 3 == 0) s.insert(f);
    auto history = history_of(changes);
    CoChangeIndex index;
    for (const auto& c : history) index.add(c);
    for (const auto& f : pool)
      for (const auto& g : pool) {
        if (f == g) continue;
        auto c = tcptest::brute_force_counts(changes, f, g);
        auto s = index.scores(f, g);
        const double support = c.total ? double(c.both) / c.total : 0.0;
        const double conf = c.f && c.both ? double(c.both) / c.f : 0.0;
        const double lift = c.f && c.g && c.both ? double(c.both) / (double(c.f) * c.g) : 0.0;
        ASSERT_DOUBLE_EQ(s.support, support);
        ASSERT_DOUBLE_EQ(s.confidence, conf);
        ASSERT_DOUBLE_EQ(s.lift, lift);
        ASSERT_EQ(index.pair_count(f, g), c.both);
      }
  }
}

TEST(Graph, NoImportsMeansNoEdges) {
  auto g = build_dependency_graph({entity("A", FileKind::SutFile), entity("B", FileKind::SutFile)},
                                  history_of({{"A", "B"}}), BuildId{1});
  EXPECT_EQ(g.nodes().size(), 2u);
  EXPECT_EQ(g.edge_count(), 0u);
}

TEST(Graph, EdgeScoresFromHistory) {
  auto g = build_dependency_graph({entity("A", FileKind::SutFile, {"B"}), entity("B", FileKind::SutFile)},
                                  history_of({{"A", "B"}, {"A"}, {"B"}, {"A", "B"}}), BuildId{4});
  const auto* e = g.edge("A", "B");
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->support, 0.5);
  EXPECT_DOUBLE_EQ(e->confidence, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(e->lift, 2.0 / 9.0);
  EXPECT_EQ(g.edge("B", "A"), nullptr);
  EXPECT_EQ(g.built_at.ordinal, 4);
}

TEST(Graph, SelfEdgesAndUnknownEndpoints) {
  DependencyGraph g;
  g.add_node("A", FileKind::SutFile);
  g.add_edge("A", "A", {}, 0.0);
  EXPECT_EQ(g.edge_count(), 0u);
  EXPECT_THROW(g.add_edge("A", "Z", {}, 0.0), Error);
}

TEST(Graph, JsonExport) {
  auto g = build_dependency_graph({entity("T", FileKind::TestFile, {"A"}), entity("A", FileKind::SutFile)},
                                  history_of({{"T", "A"}, {"A"}}), BuildId{2});
  auto j = nlohmann::json::parse(g.to_json());
  EXPECT_EQ(j["built_at"], 2);
  EXPECT_EQ(j["tests"], nlohmann::json::array({"T"}));
  ASSERT_EQ(j["edges"].size(), 1u);
  EXPECT_EQ(j["edges"][0]["from"], "T");
  EXPECT_EQ(j["edges"][0]["confidence"], 1.0);
  EXPECT_EQ(j["edges"][0]["reverse_confidence"], 0.5);
}

TEST(Covered, SutFilesOnly) {
  auto g = build_dependency_graph({entity("T1", FileKind::TestFile, {"B", "C"}), entity("T2", FileKind::TestFile, {"T1"}),
                                   entity("T3", FileKind::TestFile), entity("B", FileKind::SutFile),
                                   entity("C", FileKind::SutFile)},
                                  history_of({}), BuildId{1});
  EXPECT_EQ(covered_files(g, TestId("T1")), (Files{"B", "C"}));
  EXPECT_TRUE(covered_files(g, TestId("T2")).empty());
  EXPECT_TRUE(covered_files(g, TestId("T3")).empty());
  try {
    covered_files(g, TestId("T9"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownTest);
  }
}

TEST(CovScore, IsConfidenceFromFileToTest) {
  // f changes 2 times, both with t; t also changes twice alone.
  auto g = build_dependency_graph({entity("t", FileKind::TestFile, {"f"}), entity("f", FileKind::SutFile),
                                   entity("h", FileKind::SutFile)},
                                  history_of({{"f", "t"}, {"f", "t"}, {"t"}, {"t"}}), BuildId{1});
  EXPECT_EQ(cov_score(g, "f", TestId("t")), 1.0);
  EXPECT_EQ(g.edge("t", "f")->confidence, 0.5);  // the opposite rule
  EXPECT_EQ(cov_score(g, "h", TestId("t")), 0.0);
}

TEST(CovScore, StoredEdgeValue) {
  DependencyGraph g;
  g.add_node("t", FileKind::TestFile);
  g.add_node("f", FileKind::SutFile);
  g.add_edge("t", "f", {0.1, 0.2, 0.3}, 0.6);
  EXPECT_EQ(cov_score(g, "f", TestId("t")), 0.6);
}

TEST(Impacted, ReverseWalk) {
  DependencyGraph g;
  for (auto n : {"A", "B", "C", "D"}) g.add_node(n, FileKind::SutFile);
  g.add_edge("B", "A", {}, 0.0);
  g.add_edge("C", "B", {}, 0.0);
  g.add_edge("D", "A", {}, 0.0);
  EXPECT_TRUE(impacted_files(g, {}, 1).empty());
  EXPECT_EQ(impacted_files(g, {"A"}, 1), (Files{"B", "D"}));
  EXPECT_EQ(impacted_files(g, {"A"}, 2), (Files{"B", "C", "D"}));
  EXPECT_EQ(impacted_files(g, {"A", "B"}, 1), (Files{"C", "D"}));
  EXPECT_THROW(impacted_files(g, {"A"}, 0), Error);
}

TEST(Impacted, MonotoneInDepthAndDisjoint) {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    DependencyGraph g;
    const int n = 8;
    for (int i = 0; i < n; ++i) g.add_node("n" + std::to_string(i), FileKind::SutFile);
    for (int k = 0; k < 14; ++k)
      g.add_edge("n" + std::to_string(rng() % n), "n" + std::to_string(rng() % n), {}, 0.0);
    Files changed = {"n" + std::to_string(rng() % n)};
    Files prev;
    for (int d = 1; d <= 4; ++d) {
      auto cur = impacted_files(g, changed, d);
      EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
      for (const auto& f : changed) EXPECT_FALSE(cur.count(f));
      prev = cur;
    }
  }
}

TEST(Pdf, KeywordFallbackCounts) {
  auto h = history_of({{"f", "g"}, {"f"}, {"f", "h"}});
  h[0].message = "Fix crash";
  h[1].message = "Add option";
  h[2].message = "bugfix in parser";
  auto pdf = compute_pdf(h, classify_keyword_fallback);
  EXPECT_EQ(pdf["f"], 2);
  EXPECT_EQ(pdf["g"], 1);
  EXPECT_EQ(pdf["never"], 0);
  auto none = compute_pdf(history_of({{"f"}}), classify_keyword_fallback);
  EXPECT_EQ(none["f"], 0);
}

TEST(Pdf, MonotoneInAsOf) {
  auto h = history_of({{"f"}, {"f"}, {"f", "g"}, {"g"}});
  for (auto& c : h) c.message = "fix it";
  int prev = 0;
  for (const auto& c : h) {
    auto pdf = compute_pdf(h, classify_keyword_fallback, c.id);
    EXPECT_GE(pdf["f"], prev);
    prev = pdf["f"];
  }
  EXPECT_EQ(prev, 3);
  EXPECT_THROW(compute_pdf(h, classify_keyword_fallback, "nope"), Error);
}

TEST(Normalize, Examples) {
  auto v = normalize_scores({2, 3, 5});
  EXPECT_DOUBLE_EQ(v[0], 0.2);
  EXPECT_DOUBLE_EQ(v[1], 0.3);
  EXPECT_DOUBLE_EQ(v[2], 0.5);
  EXPECT_EQ(normalize_scores({0, 0}), (std::vector<double>{0, 0}));
  EXPECT_EQ(normalize_scores({7}), (std::vector<double>{1.0}));
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0, 10);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> s(1 + rng() % 9);
    for (auto& x : s) x = u(rng);
    auto n = normalize_scores(s);
    EXPECT_NEAR(std::accumulate(n.begin(), n.end(), 0.0), 1.0, 1e-12);
  }
}
