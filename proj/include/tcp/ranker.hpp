#pragma once

// Bagged ensemble of boosted regression trees over the 150 features, the
// single-feature heuristic rankers, and split-usage statistics.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tcp/boosting.hpp"
#include "tcp/core.hpp"
#include "tcp/features.hpp"

namespace tcp {

struct Hyperparams {
  int bag = 150;
  int trees_per_bag = 5;
  int max_leaves = 200;
  double shrinkage = 0.2;
  double sample_rate = 0.5;
  double feature_rate = 0.3;
  std::uint64_t seed = 42;

  /// Throws InvalidConfig unless counts are positive and rates in (0, 1].
  void validate() const;
  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

struct RankingModel {
  struct Bag {
    double base = 0.0;
    std::vector<gbt::RegressionTree> trees;
    friend bool operator==(const Bag&, const Bag&) = default;
  };

  Hyperparams hyperparams;
  std::uint64_t catalog_fingerprint = 0;
  BuildId trained_at;
  double base = 0.0;  // prediction when there are no bags
  std::vector<Bag> bags;
  std::vector<int> usage;  // split count per feature column

  /// Mean over bags of base + sum of tree outputs.
  double score(std::span<const double> x) const;

  std::string to_json() const;
  static RankingModel from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static RankingModel load(const std::filesystem::path& path);
  friend bool operator==(const RankingModel&, const RankingModel&) = default;
};

/// Rows of `x` with relevance labels; bags are independent, so `jobs`
/// changes only the wall-clock time. Throws NoFailedBuilds for an empty
/// training set. Constant labels give a constant model (with a warning).
RankingModel train(const gbt::Matrix& x, const std::vector<double>& labels, const Hyperparams& hp,
                   BuildId trained_at = {}, int jobs = 1);

/// Stacks the matrices; labels[i][r] is the relevance of matrices[i].rows[r].
RankingModel train(const std::vector<const FeatureMatrix*>& matrices, const std::vector<std::vector<double>>& labels,
                   const Hyperparams& hp, BuildId trained_at = {}, int jobs = 1);

struct Ordering {
  BuildId build;
  std::vector<TestId> tests;
  std::vector<double> scores;
};

/// Descending score; ties by F_AvgExeTime_Total ascending, then TestId.
/// Throws CatalogMismatch when the matrix was built with another catalog.
Ordering predict(const RankingModel& model, const FeatureMatrix& matrix);

enum class Direction { Ascending, Descending };

/// Sort by one feature; ties by TestId. Throws UnknownFeature.
Ordering heuristic_rank(const FeatureMatrix& matrix, std::string_view feature, Direction direction);

/// "F_FailRate_Total:desc" -> (name, direction); direction defaults to desc.
std::pair<std::string, Direction> parse_heuristic(std::string_view spec);

/// (feature name, split count) in catalog order.
std::vector<std::pair<std::string, int>> feature_usage(const RankingModel& model);

}  // namespace tcp
