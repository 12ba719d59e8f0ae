#pragma once

// Commit-message classifier: TF-IDF vectors fed to logistic gradient-boosted
// trees, plus a keyword rule for when no trained model is configured.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tcp/boosting.hpp"

namespace tcp {

enum class CommitClass { NonDefect = 0, DefectFix = 1 };

/// token -> (dense index, idf). idf = ln((1+N)/(1+df)) + 1.
class TfidfVocabulary {
 public:
  using SparseVector = std::vector<std::pair<int, double>>;  // sorted by index

  TfidfVocabulary() = default;
  /// Keeps the `max_size` tokens with highest document frequency (ties
  /// lexicographic); indices follow lexicographic token order.
  static TfidfVocabulary fit(const std::vector<std::vector<std::string>>& documents,
                             std::size_t max_size = 5000);

  std::size_t size() const noexcept { return tokens_.size(); }
  int index(std::string_view token) const;  // -1 when unknown
  const std::string& token(int i) const { return tokens_[static_cast<std::size_t>(i)]; }
  double idf(int i) const { return idf_[static_cast<std::size_t>(i)]; }

  /// Raw term count times idf; no length normalisation.
  SparseVector transform(const std::vector<std::string>& tokens) const;

  void add(std::string token, double idf);  // for deserialisation, in index order

 private:
  std::vector<std::string> tokens_;
  std::vector<double> idf_;
  std::map<std::string, int, std::less<>> index_;
};

struct ClassifierOptions {
  int trees = 100;
  int max_leaves = 8;
  double learning_rate = 0.3;
  double lambda = 1.0;
  std::size_t max_vocabulary = 5000;
  double threshold = 0.5;
  std::uint64_t seed = 42;
};

class CommitClassifier {
 public:
  CommitClassifier() = default;
  CommitClassifier(TfidfVocabulary vocabulary, double base_score,
                   std::vector<gbt::RegressionTree> trees, double threshold);

  /// P(DefectFix). A message with no in-vocabulary token scores 0.
  double probability(std::string_view message) const;
  CommitClass classify(std::string_view message) const;

  const TfidfVocabulary& vocabulary() const noexcept { return vocabulary_; }
  double threshold() const noexcept { return threshold_; }
  std::size_t tree_count() const noexcept { return trees_.size(); }

  std::string to_json() const;
  static CommitClassifier from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static CommitClassifier load(const std::filesystem::path& path);

 private:
  double margin(const TfidfVocabulary::SparseVector& x) const;

  TfidfVocabulary vocabulary_;
  double base_score_ = 0.0;
  std::vector<gbt::RegressionTree> trees_;
  double threshold_ = 0.5;
};

struct LabeledMessage {
  std::string message;
  CommitClass label = CommitClass::NonDefect;
};

struct TrainedClassifier {
  CommitClassifier model;
  double cv_accuracy = 0.0;
  std::vector<double> fold_accuracy;
};

/// Stratified k-fold CV (seeded shuffle) then a final fit on the whole corpus.
/// Throws DegenerateCorpus on a single-class corpus, InvalidConfig when a class
/// has fewer than `folds` examples.
TrainedClassifier train_classifier(const std::vector<LabeledMessage>& corpus, int folds = 5,
                                   const ClassifierOptions& options = {});

CommitClassifier fit_classifier(const std::vector<LabeledMessage>& corpus,
                                const ClassifierOptions& options = {});

CommitClass classify(const CommitClassifier& clf, std::string_view message);

/// DefectFix iff a stemmed token is fix/bug/defect/patch/fault/repair, or a
/// run of them written together ("bugfix").
CommitClass classify_keyword_fallback(std::string_view message);

/// CSV with `label` and `message` columns in either order; label 0/1.
std::vector<LabeledMessage> load_labeled_corpus(const std::filesystem::path& path);

}  // namespace tcp
