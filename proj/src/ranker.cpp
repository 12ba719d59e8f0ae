#include "tcp/ranker.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "json_io.hpp"
#include "tcp/catalog.hpp"
#include "tcp/log.hpp"
#include "tcp/random.hpp"

namespace tcp {
namespace {

using detail::json;

constexpr std::string_view kFormat = "tcp-ranking-model";
constexpr int kVersion = 1;

std::uint64_t parse_hex(const std::string& s) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &used, 16);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw Error(Errc::SchemaError, fmt::format("bad fingerprint '{}'", s));
  return v;
}

RankingModel::Bag fit_bag(const gbt::BinnedMatrix& x, const std::vector<double>& labels, const Hyperparams& hp,
                          std::size_t bag_index, std::vector<int>& usage) {
  const auto n = static_cast<std::uint32_t>(labels.size());
  const auto cols = static_cast<std::uint32_t>(x.cols());
  Rng row_rng(mix_seed(hp.seed, 2 * bag_index));
  Rng col_rng(mix_seed(hp.seed, 2 * bag_index + 1));
  auto rows = sample_indices(row_rng, n, static_cast<std::uint32_t>(std::ceil(hp.sample_rate * n)));
  std::sort(rows.begin(), rows.end());
  auto picked = sample_indices(col_rng, cols, static_cast<std::uint32_t>(std::ceil(hp.feature_rate * cols)));
  std::vector<int> features(picked.begin(), picked.end());
  std::sort(features.begin(), features.end());

  RankingModel::Bag bag;
  double sum = 0.0;
  for (auto r : rows) sum += labels[r];
  bag.base = sum / static_cast<double>(rows.size());
  std::vector<double> residual(labels.size(), 0.0);
  for (auto r : rows) residual[r] = labels[r] - bag.base;
  gbt::TreeOptions opt{hp.max_leaves, 1, 0.0, hp.shrinkage};
  std::vector<double> fitted;
  for (int t = 0; t < hp.trees_per_bag; ++t) {
    bag.trees.push_back(gbt::fit_tree(x, rows, features, residual, {}, opt, &fitted, &usage));
    for (auto r : rows) residual[r] -= fitted[r];
  }
  return bag;
}

}  // namespace

void Hyperparams::validate() const {
  if (bag < 1 || trees_per_bag < 1 || max_leaves < 2)
    throw Error(Errc::InvalidConfig, "bag and tree counts must be positive and leaves at least 2");
  if (!(shrinkage > 0.0))
    throw Error(Errc::InvalidConfig, "shrinkage must be positive");
  if (!(sample_rate > 0.0 && sample_rate <= 1.0) || !(feature_rate > 0.0 && feature_rate <= 1.0))
    throw Error(Errc::InvalidConfig, "sample and feature rates must be in (0, 1]");
}

double RankingModel::score(std::span<const double> x) const {
  if (bags.empty()) return base;
  double total = 0.0;
  for (const auto& b : bags) {
    double s = b.base;
    for (const auto& t : b.trees) s += t.predict(x);
    total += s;
  }
  return total / static_cast<double>(bags.size());
}

RankingModel train(const gbt::Matrix& x, const std::vector<double>& labels, const Hyperparams& hp, BuildId trained_at,
                   int jobs) {
  hp.validate();
  if (x.rows() == 0) throw Error(Errc::NoFailedBuilds, "no training rows");
  if (labels.size() != x.rows()) throw Error(Errc::Invariant, "label count differs from row count");
  RankingModel model;
  model.hyperparams = hp;
  model.catalog_fingerprint = FeatureCatalog::standard().fingerprint();
  model.trained_at = trained_at;
  model.usage.assign(x.cols(), 0);
  model.base = std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(labels.size());
  if (std::all_of(labels.begin(), labels.end(), [&](double y) { return y == labels.front(); })) {
    warn("training labels are constant; the model predicts a constant");
    return model;
  }
  const auto binned = gbt::BinnedMatrix::build(x);
  model.bags.resize(hp.bag);
  std::vector<std::vector<int>> usage(hp.bag);
  const int workers = std::clamp(jobs, 1, hp.bag);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (int b; (b = next.fetch_add(1)) < hp.bag;) {
      try {
        usage[b].assign(x.cols(), 0);
        model.bags[b] = fit_bag(binned, labels, hp, static_cast<std::size_t>(b), usage[b]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  for (const auto& u : usage)
    for (std::size_t c = 0; c < u.size(); ++c) model.usage[c] += u[c];
  return model;
}

RankingModel train(const std::vector<const FeatureMatrix*>& matrices, const std::vector<std::vector<double>>& labels,
                   const Hyperparams& hp, BuildId trained_at, int jobs) {
  if (matrices.size() != labels.size()) throw Error(Errc::Invariant, "one label vector per matrix expected");
  const auto fingerprint = FeatureCatalog::standard().fingerprint();
  gbt::Matrix x(0, kFeatureCount);
  std::vector<double> y;
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const auto& m = *matrices[i];
    if (m.catalog_fingerprint != fingerprint) throw Error(Errc::CatalogMismatch, "training matrix uses another catalog");
    if (labels[i].size() != m.rows.size()) throw Error(Errc::Invariant, "label count differs from row count");
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
      x.append_row(m.rows[r].values);
      y.push_back(labels[i][r]);
    }
  }
  if (matrices.empty() || y.empty()) throw Error(Errc::NoFailedBuilds, "no prior failed builds to train on");
  return train(x, y, hp, trained_at, jobs);
}

std::string RankingModel::to_json() const {
  const auto& catalog = FeatureCatalog::standard();
  json hpj = {{"bag", hyperparams.bag},
              {"trees_per_bag", hyperparams.trees_per_bag},
              {"max_leaves", hyperparams.max_leaves},
              {"shrinkage", hyperparams.shrinkage},
              {"sample_rate", hyperparams.sample_rate},
              {"feature_rate", hyperparams.feature_rate},
              {"seed", hyperparams.seed}};
  json bags_j = json::array();
  for (const auto& b : bags) {
    json trees = json::array();
    for (const auto& t : b.trees) trees.push_back(detail::tree_to_json(t));
    bags_j.push_back({{"base", b.base}, {"trees", std::move(trees)}});
  }
  json usage_j = json::object();
  for (std::size_t c = 0; c < usage.size(); ++c)
    usage_j[c < catalog.size() ? catalog[c].name : std::to_string(c)] = usage[c];
  json j = {{"format", kFormat},
            {"version", kVersion},
            {"hyperparams", hpj},
            {"catalog_fingerprint", fmt::format("{:016x}", catalog_fingerprint)},
            {"trained_at", trained_at.ordinal},
            {"base", base},
            {"bags", std::move(bags_j)},
            {"feature_usage", std::move(usage_j)}};
  return j.dump();
}

RankingModel RankingModel::from_json(std::string_view text) {
  RankingModel m;
  try {
    auto j = json::parse(text);
    detail::expect_format(j, kFormat, kVersion);
    const auto& h = j.at("hyperparams");
    m.hyperparams.bag = h.at("bag").get<int>();
    m.hyperparams.trees_per_bag = h.at("trees_per_bag").get<int>();
    m.hyperparams.max_leaves = h.at("max_leaves").get<int>();
    m.hyperparams.shrinkage = h.at("shrinkage").get<double>();
    m.hyperparams.sample_rate = h.at("sample_rate").get<double>();
    m.hyperparams.feature_rate = h.at("feature_rate").get<double>();
    m.hyperparams.seed = h.at("seed").get<std::uint64_t>();
    m.catalog_fingerprint = parse_hex(j.at("catalog_fingerprint").get<std::string>());
    m.trained_at.ordinal = j.at("trained_at").get<std::int64_t>();
    m.base = j.at("base").get<double>();
    for (const auto& b : j.at("bags")) {
      Bag bag;
      bag.base = b.at("base").get<double>();
      for (const auto& t : b.at("trees")) bag.trees.push_back(detail::tree_from_json(t));
      m.bags.push_back(std::move(bag));
    }
    const auto& catalog = FeatureCatalog::standard();
    m.usage.assign(catalog.size(), 0);
    for (const auto& [name, count] : j.at("feature_usage").items()) m.usage[catalog.require(name)] = count.get<int>();
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, fmt::format("ranking model: {}", e.what()));
  }
  for (const auto& b : m.bags)
    for (const auto& t : b.trees)
      for (const auto& n : t.nodes())
        if (n.feature >= kFeatureCount) throw Error(Errc::SchemaError, "ranking model: split feature out of range");
  return m;
}

void RankingModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, fmt::format("cannot write {}", path.string()));
  out << to_json() << '\n';
}

RankingModel RankingModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::SchemaError, fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

Ordering predict(const RankingModel& model, const FeatureMatrix& matrix) {
  if (model.catalog_fingerprint != matrix.catalog_fingerprint)
    throw Error(Errc::CatalogMismatch, "model and feature matrix use different catalogs");
  const int time_col = FeatureCatalog::standard().require("F_AvgExeTime_Total");
  std::vector<std::size_t> idx(matrix.rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> scores(matrix.rows.size());
  for (std::size_t r = 0; r < matrix.rows.size(); ++r) scores[r] = model.score(matrix.rows[r].values);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    const double ta = matrix.rows[a].values[time_col], tb = matrix.rows[b].values[time_col];
    if (ta != tb) return ta < tb;
    return matrix.rows[a].test < matrix.rows[b].test;
  });
  Ordering o{matrix.build, {}, {}};
  for (auto i : idx) {
    o.tests.push_back(matrix.rows[i].test);
    o.scores.push_back(scores[i]);
  }
  return o;
}

Ordering heuristic_rank(const FeatureMatrix& matrix, std::string_view feature, Direction direction) {
  const int col = FeatureCatalog::standard().require(feature);
  std::vector<std::size_t> idx(matrix.rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double va = matrix.rows[a].values[col], vb = matrix.rows[b].values[col];
    if (va != vb) return direction == Direction::Ascending ? va < vb : va > vb;
    return matrix.rows[a].test < matrix.rows[b].test;
  });
  Ordering o{matrix.build, {}, {}};
  for (auto i : idx) {
    o.tests.push_back(matrix.rows[i].test);
    o.scores.push_back(matrix.rows[i].values[col]);
  }
  return o;
}

std::pair<std::string, Direction> parse_heuristic(std::string_view spec) {
  auto colon = spec.rfind(':');
  std::string name(spec.substr(0, colon));
  Direction d = Direction::Descending;
  if (colon != std::string_view::npos) {
    auto dir = spec.substr(colon + 1);
    if (dir == "asc") {
      d = Direction::Ascending;
    } else if (dir != "desc") {
      throw Error(Errc::InvalidConfig, fmt::format("heuristic direction must be asc or desc, got '{}'", dir));
    }
  }
  FeatureCatalog::standard().require(name);
  return {name, d};
}

std::vector<std::pair<std::string, int>> feature_usage(const RankingModel& model) {
  const auto& catalog = FeatureCatalog::standard();
  std::vector<std::pair<std::string, int>> out;
  for (std::size_t c = 0; c < model.usage.size(); ++c)
    out.emplace_back(c < catalog.size() ? catalog[c].name : std::to_string(c), model.usage[c]);
  return out;
}

}  // namespace tcp
