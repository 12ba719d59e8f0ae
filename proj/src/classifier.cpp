#include "tcp/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json_io.hpp"
#include "tcp/core.hpp"
#include "tcp/csv.hpp"
#include "tcp/random.hpp"
#include "tcp/text.hpp"

namespace tcp {

using detail::json;

TfidfVocabulary TfidfVocabulary::fit(const std::vector<std::vector<std::string>>& documents,
                                     std::size_t max_size) {
  std::map<std::string, int, std::less<>> df;
  for (const auto& doc : documents) {
    std::set<std::string_view> seen(doc.begin(), doc.end());
    for (auto t : seen) ++df[std::string(t)];
  }
  std::vector<std::pair<std::string, int>> ranked(df.begin(), df.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size) ranked.resize(max_size);
  std::sort(ranked.begin(), ranked.end());

  const double n = static_cast<double>(documents.size());
  TfidfVocabulary v;
  for (auto& [token, count] : ranked)
    v.add(token, std::log((1.0 + n) / (1.0 + count)) + 1.0);
  return v;
}

void TfidfVocabulary::add(std::string token, double idf) {
  if (index_.contains(token)) throw Error(Errc::SchemaError, "duplicate vocabulary token " + token);
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
  idf_.push_back(idf);
}

int TfidfVocabulary::index(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

TfidfVocabulary::SparseVector TfidfVocabulary::transform(const std::vector<std::string>& tokens) const {
  std::map<int, int> counts;
  for (const auto& t : tokens) {
    int i = index(t);
    if (i >= 0) ++counts[i];
  }
  SparseVector out;
  out.reserve(counts.size());
  for (auto [i, c] : counts) out.emplace_back(i, c * idf(i));
  return out;
}

CommitClassifier::CommitClassifier(TfidfVocabulary vocabulary, double base_score,
                                   std::vector<gbt::RegressionTree> trees, double threshold)
    : vocabulary_(std::move(vocabulary)),
      base_score_(base_score),
      trees_(std::move(trees)),
      threshold_(threshold) {}

double CommitClassifier::margin(const TfidfVocabulary::SparseVector& x) const {
  std::vector<double> dense(vocabulary_.size(), 0.0);
  for (auto [i, v] : x) dense[static_cast<std::size_t>(i)] = v;
  double m = base_score_;
  for (const auto& t : trees_) m += t.predict(dense);
  return m;
}

double CommitClassifier::probability(std::string_view message) const {
  auto x = vocabulary_.transform(text::preprocess_message(message));
  if (x.empty()) return 0.0;
  return 1.0 / (1.0 + std::exp(-margin(x)));
}

CommitClass CommitClassifier::classify(std::string_view message) const {
  return probability(message) >= threshold_ ? CommitClass::DefectFix : CommitClass::NonDefect;
}

CommitClass classify(const CommitClassifier& clf, std::string_view message) {
  return clf.classify(message);
}

namespace {

constexpr std::string_view kFormat = "tcp-commit-classifier";
constexpr int kVersion = 1;

double sigmoid(double m) { return 1.0 / (1.0 + std::exp(-m)); }

std::vector<std::vector<std::string>> tokenize_all(const std::vector<LabeledMessage>& corpus) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(corpus.size());
  for (const auto& m : corpus) docs.push_back(text::preprocess_message(m.message));
  return docs;
}

CommitClassifier fit_tokens(const std::vector<std::vector<std::string>>& docs,
                            const std::vector<int>& labels, const ClassifierOptions& opt) {
  const std::size_t n = docs.size();
  TfidfVocabulary vocab = TfidfVocabulary::fit(docs, opt.max_vocabulary);

  std::vector<std::vector<std::pair<std::uint32_t, double>>> columns(vocab.size());
  for (std::size_t r = 0; r < n; ++r)
    for (auto [i, v] : vocab.transform(docs[r]))
      columns[static_cast<std::size_t>(i)].emplace_back(static_cast<std::uint32_t>(r), v);
  auto x = gbt::BinnedMatrix::build(n, vocab.size(), [&](std::size_t c, std::vector<double>& out) {
    out.assign(n, 0.0);
    for (auto [r, v] : columns[c]) out[r] = v;
  });

  double positives = std::accumulate(labels.begin(), labels.end(), 0.0);
  double p0 = std::clamp(positives / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
  double base = std::log(p0 / (1.0 - p0));

  std::vector<std::uint32_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0U);
  std::vector<int> features(vocab.size());
  std::iota(features.begin(), features.end(), 0);
  std::vector<double> margin(n, base), grad(n), hess(n), fitted(n);
  gbt::TreeOptions tree_opt{opt.max_leaves, 1, opt.lambda, opt.learning_rate};

  std::vector<gbt::RegressionTree> trees;
  for (int t = 0; t < opt.trees; ++t) {
    for (std::size_t r = 0; r < n; ++r) {
      double p = sigmoid(margin[r]);
      grad[r] = labels[r] - p;
      hess[r] = std::max(p * (1.0 - p), 1e-16);
    }
    trees.push_back(gbt::fit_tree(x, rows, features, grad, hess, tree_opt, &fitted));
    for (std::size_t r = 0; r < n; ++r) margin[r] += fitted[r];
  }
  return CommitClassifier(std::move(vocab), base, std::move(trees), opt.threshold);
}

std::vector<int> label_vector(const std::vector<LabeledMessage>& corpus) {
  std::vector<int> y;
  y.reserve(corpus.size());
  for (const auto& m : corpus) y.push_back(m.label == CommitClass::DefectFix ? 1 : 0);
  return y;
}

}  // namespace

CommitClassifier fit_classifier(const std::vector<LabeledMessage>& corpus,
                                const ClassifierOptions& options) {
  if (corpus.empty()) throw Error(Errc::DegenerateCorpus, "empty training corpus");
  return fit_tokens(tokenize_all(corpus), label_vector(corpus), options);
}

TrainedClassifier train_classifier(const std::vector<LabeledMessage>& corpus, int folds,
                                   const ClassifierOptions& options) {
  if (folds < 2) throw Error(Errc::InvalidConfig, "cross-validation needs at least 2 folds");
  const auto docs = tokenize_all(corpus);
  const auto labels = label_vector(corpus);

  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  if (by_class[0].empty() || by_class[1].empty())
    throw Error(Errc::DegenerateCorpus, "training corpus contains a single class");
  for (const auto& members : by_class)
    if (members.size() < static_cast<std::size_t>(folds))
      throw Error(Errc::InvalidConfig,
                  fmt::format("a class has {} examples, fewer than {} folds", members.size(), folds));

  std::vector<int> fold_of(corpus.size());
  Rng rng(options.seed);
  for (auto& members : by_class) {
    shuffle(members, rng);
    for (std::size_t k = 0; k < members.size(); ++k)
      fold_of[members[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
  }

  TrainedClassifier result;
  for (int f = 0; f < folds; ++f) {
    std::vector<std::vector<std::string>> train_docs;
    std::vector<int> train_labels;
    for (std::size_t i = 0; i < corpus.size(); ++i)
      if (fold_of[i] != f) {
        train_docs.push_back(docs[i]);
        train_labels.push_back(labels[i]);
      }
    auto model = fit_tokens(train_docs, train_labels, options);
    int correct = 0;
    int total = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (fold_of[i] != f) continue;
      ++total;
      if (model.classify(corpus[i].message) == corpus[i].label) ++correct;
    }
    result.fold_accuracy.push_back(static_cast<double>(correct) / total);
  }
  result.cv_accuracy = std::accumulate(result.fold_accuracy.begin(), result.fold_accuracy.end(), 0.0) /
                       static_cast<double>(folds);
  result.model = fit_tokens(docs, labels, options);
  return result;
}

CommitClass classify_keyword_fallback(std::string_view message) {
  static const std::vector<std::string> keywords = {"fix", "bug", "defect", "patch", "fault", "repair"};
  auto is_keyword_run = [](const std::string& token) -> bool {
    // can[i]: token[0, i) splits into keywords
    std::vector<bool> can(token.size() + 1, false);
    can[0] = true;
    for (std::size_t i = 0; i < token.size(); ++i) {
      if (!can[i]) continue;
      for (const auto& k : keywords)
        if (token.compare(i, k.size(), k) == 0) can[i + k.size()] = true;
    }
    return can[token.size()];
  };
  for (const auto& token : text::preprocess_message(message))
    if (is_keyword_run(token)) return CommitClass::DefectFix;
  return CommitClass::NonDefect;
}

std::string CommitClassifier::to_json() const {
  json vocab = json::array();
  for (std::size_t i = 0; i < vocabulary_.size(); ++i)
    vocab.push_back(json::array({vocabulary_.token(static_cast<int>(i)), vocabulary_.idf(static_cast<int>(i))}));
  json trees = json::array();
  for (const auto& t : trees_) trees.push_back(detail::tree_to_json(t));
  json doc = {{"format", kFormat}, {"version", kVersion},     {"threshold", threshold_},
              {"base_score", base_score_}, {"vocabulary", vocab}, {"trees", trees}};
  return doc.dump();
}

CommitClassifier CommitClassifier::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
    detail::expect_format(doc, kFormat, kVersion);
    TfidfVocabulary vocab;
    for (const auto& entry : doc.at("vocabulary"))
      vocab.add(entry.at(0).get<std::string>(), entry.at(1).get<double>());
    std::vector<gbt::RegressionTree> trees;
    for (const auto& t : doc.at("trees")) trees.push_back(detail::tree_from_json(t));
    return CommitClassifier(std::move(vocab), doc.at("base_score").get<double>(), std::move(trees),
                            doc.at("threshold").get<double>());
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, fmt::format("bad classifier document: {}", e.what()));
  }
}

void CommitClassifier::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << to_json() << '\n';
}

CommitClassifier CommitClassifier::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return from_json(s.str());
}

std::vector<LabeledMessage> load_labeled_corpus(const std::filesystem::path& path) {
  auto table = csv::read_file(path);
  const auto source = path.string();
  const std::size_t label_col = table.require("label", source);
  const std::size_t message_col = table.require("message", source);
  std::vector<LabeledMessage> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (row.size() != table.header.size())
      throw Error(Errc::SchemaError, fmt::format("{}: row {} has {} fields, expected {}", source,
                                                 table.line_numbers[i], row.size(), table.header.size()));
    const auto& label = row[label_col];
    if (label != "0" && label != "1")
      throw Error(Errc::SchemaError,
                  fmt::format("{}: row {}: label must be 0 or 1", source, table.line_numbers[i]));
    out.push_back({row[message_col], label == "1" ? CommitClass::DefectFix : CommitClass::NonDefect});
  }
  return out;
}

}  // namespace tcp
