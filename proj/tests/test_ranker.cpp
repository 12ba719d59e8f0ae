#include <gtest/gtest.h>

#include "support.hpp"
#include "tcp/ranker.hpp"

using namespace tcp;

namespace {

const FeatureCatalog& cat() { return FeatureCatalog::standard(); }

Hyperparams small(std::uint64_t seed = 42) {
  Hyperparams hp;
  hp.bag = 20;
  hp.seed = seed;
  return hp;
}

// x uniform in [0,1), label = x > 0.5; optional noise columns.
std::pair<gbt::Matrix, std::vector<double>> separable(std::size_t n, std::size_t noise, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  gbt::Matrix x(n, 1 + noise);
  std::vector<double> y(n);
  for (std::size_t r = 0; r < n; ++r) {
    x.at(r, 0) = u(rng);
    for (std::size_t c = 1; c <= noise; ++c) x.at(r, c) = u(rng);
    y[r] = x.at(r, 0) > 0.5 ? 1.0 : 0.0;
  }
  return {x, y};
}

FeatureMatrix matrix_with(const std::vector<std::pair<std::string, std::map<std::string, double>>>& rows) {
  FeatureMatrix m;
  m.build = BuildId{9};
  for (const auto& [test, values] : rows) {
    FeatureVector v;
    v.build = m.build;
    v.test = TestId(test);
    for (const auto& [name, value] : values) v.values[cat().require(name)] = value;
    m.rows.push_back(v);
  }
  return m;
}

std::vector<std::string> paths(const Ordering& o) {
  std::vector<std::string> out;
  for (const auto& t : o.tests) out.push_back(t.path());
  return out;
}

}  // namespace

TEST(Hyperparams, DefaultsAndValidation) {
  Hyperparams hp;
  EXPECT_EQ(hp.bag, 150);
  EXPECT_EQ(hp.trees_per_bag, 5);
  EXPECT_EQ(hp.max_leaves, 200);
  EXPECT_EQ(hp.shrinkage, 0.2);
  EXPECT_EQ(hp.sample_rate, 0.5);
  EXPECT_EQ(hp.feature_rate, 0.3);
  EXPECT_NO_THROW(hp.validate());
  for (auto mutate : std::vector<std::function<void(Hyperparams&)>>{
           [](Hyperparams& h) { h.bag = 0; }, [](Hyperparams& h) { h.trees_per_bag = -1; },
           [](Hyperparams& h) { h.max_leaves = 0; }, [](Hyperparams& h) { h.shrinkage = 0; },
           [](Hyperparams& h) { h.sample_rate = 1.5; }, [](Hyperparams& h) { h.feature_rate = 0; }}) {
    Hyperparams bad;
    mutate(bad);
    EXPECT_THROW(bad.validate(), Error);
  }
}

TEST(Train, SeparableToy) {
  auto [x, y] = separable(200, 0, 1);
  auto model = train(x, y, small());
  std::vector<double> scores;
  double pos = 0, neg = 0;
  int npos = 0, nneg = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double s = model.score(x.row(r));
    scores.push_back(s);
    (y[r] > 0.5 ? pos : neg) += s;
    (y[r] > 0.5 ? npos : nneg) += 1;
  }
  EXPECT_GE(pos / npos - neg / nneg, 0.5);
  EXPECT_EQ(tcptest::auc(scores, y), 1.0);
}

TEST(Train, ConstantLabels) {
  auto [x, y] = separable(50, 2, 2);
  std::fill(y.begin(), y.end(), 0.0);
  auto model = train(x, y, small());
  for (std::size_t r = 0; r < x.rows(); ++r) EXPECT_EQ(model.score(x.row(r)), 0.0);
  for (int u : model.usage) EXPECT_EQ(u, 0);
  std::fill(y.begin(), y.end(), 1.0);
  auto ones = train(x, y, small());
  EXPECT_DOUBLE_EQ(ones.score(x.row(3)), 1.0);
}

TEST(Train, EmptyIsNoFailedBuilds) {
  try {
    train(gbt::Matrix(0, 3), {}, small());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoFailedBuilds);
  }
}

TEST(Train, DeterministicAndJobIndependent) {
  auto [x, y] = separable(300, 4, 3);
  auto a = train(x, y, small(7), BuildId{5}, 1);
  auto b = train(x, y, small(7), BuildId{5}, 3);
  EXPECT_EQ(a, b);
  auto c = train(x, y, small(8), BuildId{5}, 1);
  EXPECT_NE(a, c);
}

TEST(Train, InformativeFeatureSplitsMoreOften) {
  int wins = 0;
  for (std::uint32_t seed = 0; seed < 100; ++seed) {
    auto [x, y] = separable(120, 1, 1000 + seed);
    Hyperparams hp = small(seed);
    hp.feature_rate = 1.0;
    auto model = train(x, y, hp);
    wins += model.usage[0] > model.usage[1];
  }
  EXPECT_GE(wins, 95);
}

TEST(Train, ConstantColumnChangesNothing) {
  auto [x, y] = separable(150, 1, 4);
  Hyperparams hp = small();
  hp.feature_rate = 1.0;
  auto base = train(x, y, hp);
  gbt::Matrix wider(x.rows(), 3);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    wider.at(r, 0) = x.at(r, 0);
    wider.at(r, 1) = x.at(r, 1);
    wider.at(r, 2) = 7.0;
  }
  auto w = train(wider, y, hp);
  EXPECT_EQ(w.usage[2], 0);
  for (std::size_t r = 0; r < x.rows(); ++r) EXPECT_DOUBLE_EQ(base.score(x.row(r)), w.score(wider.row(r)));
}

TEST(Model, UsageSumsToSplits) {
  auto [x, y] = separable(200, 3, 5);
  auto model = train(x, y, small());
  int splits = 0;
  for (const auto& bag : model.bags)
    for (const auto& t : bag.trees) splits += t.split_count();
  int total = 0;
  for (int u : model.usage) total += u;
  EXPECT_EQ(total, splits);
  EXPECT_GT(splits, 0);
  EXPECT_EQ(model.bags.size(), 20u);
  for (const auto& bag : model.bags) EXPECT_EQ(bag.trees.size(), 5u);
}

TEST(Model, ScoreIsMeanOfBags) {
  auto [x, y] = separable(100, 2, 6);
  auto model = train(x, y, small());
  for (std::size_t r = 0; r < 10; ++r) {
    double sum = 0.0;
    for (const auto& bag : model.bags) {
      double s = bag.base;
      for (const auto& t : bag.trees) s += t.predict(x.row(r));
      sum += s;
    }
    EXPECT_NEAR(model.score(x.row(r)), sum / model.bags.size(), 1e-12);
  }
}

TEST(Model, JsonRoundTrip) {
  tcptest::TempDir dir;
  auto m = matrix_with({{"a", {{"F_FailRate_Total", 0.9}}}, {"b", {{"F_FailRate_Total", 0.1}}},
                        {"c", {{"F_FailRate_Total", 0.0}}}, {"d", {{"F_FailRate_Total", 0.8}}}});
  auto model = train({&m}, {{1, 0, 0, 1}}, small(), BuildId{12});
  model.save(dir / "m.json");
  auto back = RankingModel::load(dir / "m.json");
  EXPECT_EQ(back, model);
  EXPECT_EQ(back.trained_at.ordinal, 12);
  EXPECT_EQ(back.catalog_fingerprint, cat().fingerprint());
  EXPECT_THROW(RankingModel::from_json("{\"version\": 999}"), Error);
}

TEST(Predict, TieBreakByAverageTimeThenId) {
  auto m = matrix_with({{"slow", {{"F_AvgExeTime_Total", 5000}}},
                        {"fast", {{"F_AvgExeTime_Total", 2000}}},
                        {"b_same", {{"F_AvgExeTime_Total", 3000}}},
                        {"a_same", {{"F_AvgExeTime_Total", 3000}}}});
  RankingModel constant;
  constant.catalog_fingerprint = cat().fingerprint();
  constant.base = 0.3;
  constant.usage.assign(kFeatureCount, 0);
  auto o = predict(constant, m);
  EXPECT_EQ(paths(o), (std::vector<std::string>{"fast", "a_same", "b_same", "slow"}));
  EXPECT_EQ(o.build.ordinal, 9);
  for (const auto& [name, count] : feature_usage(constant)) EXPECT_EQ(count, 0) << name;
}

TEST(Predict, LearnedOrderAndSingleTest) {
  std::vector<std::pair<std::string, std::map<std::string, double>>> rows;
  std::vector<double> y;
  for (int i = 0; i < 40; ++i) {
    rows.push_back({"t" + std::to_string(i), {{"F_FailRate_Total", i / 40.0}}});
    y.push_back(i >= 30 ? 1.0 : 0.0);
  }
  auto m = matrix_with(rows);
  Hyperparams hp = small();
  hp.feature_rate = 1.0;
  auto model = train({&m}, {y}, hp);
  auto o = predict(model, m);
  for (int i = 0; i < 10; ++i) EXPECT_GE(std::stoi(o.tests[i].path().substr(1)), 30);
  EXPECT_EQ(o.tests.size(), 40u);
  EXPECT_TRUE(std::is_sorted(o.scores.rbegin(), o.scores.rend()));

  auto one = matrix_with({{"only", {}}});
  EXPECT_EQ(paths(predict(model, one)), std::vector<std::string>{"only"});
}

TEST(Predict, CatalogMismatch) {
  auto m = matrix_with({{"a", {}}});
  RankingModel model;
  model.catalog_fingerprint = cat().fingerprint() + 1;
  try {
    predict(model, m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CatalogMismatch);
  }
}

TEST(Heuristic, FailRateDescAndAsc) {
  auto m = matrix_with({{"low", {{"F_FailRate_Total", 0.1}}},
                        {"high", {{"F_FailRate_Total", 0.9}}},
                        {"zero", {{"F_FailRate_Total", 0.0}}}});
  auto desc = heuristic_rank(m, "F_FailRate_Total", Direction::Descending);
  EXPECT_EQ(paths(desc), (std::vector<std::string>{"high", "low", "zero"}));
  auto asc = heuristic_rank(m, "F_FailRate_Total", Direction::Ascending);
  auto rev = paths(desc);
  std::reverse(rev.begin(), rev.end());
  EXPECT_EQ(paths(asc), rev);
  EXPECT_THROW(heuristic_rank(m, "F_Nope", Direction::Ascending), Error);
}

TEST(Heuristic, TiesByTestId) {
  auto m = matrix_with({{"c", {{"F_Age", 1}}}, {"a", {{"F_Age", 1}}}, {"b", {{"F_Age", 2}}}});
  EXPECT_EQ(paths(heuristic_rank(m, "F_Age", Direction::Descending)), (std::vector<std::string>{"b", "a", "c"}));
  EXPECT_EQ(paths(heuristic_rank(m, "F_Age", Direction::Ascending)), (std::vector<std::string>{"a", "c", "b"}));
}

TEST(Heuristic, ParseSpec) {
  EXPECT_EQ(parse_heuristic("F_FailRate_Total:desc"), std::pair(std::string("F_FailRate_Total"), Direction::Descending));
  EXPECT_EQ(parse_heuristic("F_Age:asc"), std::pair(std::string("F_Age"), Direction::Ascending));
  EXPECT_EQ(parse_heuristic("F_Age").second, Direction::Descending);
  EXPECT_THROW(parse_heuristic("F_Age:up"), Error);
}
