#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tcp/classifier.hpp"
#include "tcp/log.hpp"
#include "tcp/text.hpp"

using namespace tcp;
using Tokens = std::vector<std::string>;

TEST(Preprocess, EmptyMessage) { EXPECT_TRUE(text::preprocess_message("").empty()); }

TEST(Preprocess, UrlStopWordAndStem) {
  EXPECT_EQ(text::preprocess_message("Fixed NPE, see https://x.y/z"), (Tokens{"fix", "npe", "<url>"}));
}

TEST(Preprocess, CaseFolding) { EXPECT_EQ(text::preprocess_message("BUG bug Bug"), (Tokens{"bug", "bug", "bug"})); }

TEST(Preprocess, IdempotentOnOwnOutput) {
  for (const auto& m : tcptest::keyword_corpus(100)) {
    auto once = text::preprocess_message(m.message);
    std::string joined;
    for (const auto& t : once) joined += t + " ";
    EXPECT_EQ(text::preprocess_message(joined), once) << m.message;
  }
}

TEST(Porter, ReferenceWords) {
  // Published examples from the algorithm's description.
  const std::pair<const char*, const char*> cases[] = {
      {"caresses", "caress"}, {"ponies", "poni"},      {"cats", "cat"},         {"feed", "feed"},
      {"agreed", "agre"},     {"plastered", "plaster"}, {"motoring", "motor"},  {"hopping", "hop"},
      {"filing", "file"},     {"happy", "happi"},      {"relational", "relat"}, {"generalization", "gener"},
      {"fixed", "fix"},       {"fixes", "fix"},        {"hopeful", "hope"},     {"goodness", "good"},
  };
  for (auto [in, out] : cases) EXPECT_EQ(text::porter_stem(in), out) << in;
}

TEST(Porter, IteratedStemReachesFixedPoint) {
  EXPECT_EQ(text::stem("agreed"), "agr");
  for (auto w : {"fixed", "relational", "generalization", "hopping"}) EXPECT_EQ(text::stem(text::stem(w)), text::stem(w));
}

TEST(StopWords, ListSize) {
  EXPECT_EQ(text::stop_words().size(), 318u);
  EXPECT_TRUE(text::is_stop_word("see"));
  EXPECT_FALSE(text::is_stop_word("bug"));
}

TEST(Tfidf, IdfFormula) {
  std::vector<Tokens> docs = {{"a", "b"}, {"a"}, {"c"}};
  auto v = TfidfVocabulary::fit(docs);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_DOUBLE_EQ(v.idf(v.index("a")), std::log(4.0 / 3.0) + 1.0);
  EXPECT_DOUBLE_EQ(v.idf(v.index("c")), std::log(4.0 / 2.0) + 1.0);
  EXPECT_EQ(v.index("zzz"), -1);
  auto x = v.transform({"a", "a", "zzz"});
  ASSERT_EQ(x.size(), 1u);
  EXPECT_DOUBLE_EQ(x[0].second, 2.0 * v.idf(v.index("a")));
}

TEST(Tfidf, VocabularyCapKeepsFrequentTokens) {
  std::vector<Tokens> docs = {{"x", "y"}, {"x"}, {"x", "z"}, {"y"}};
  auto v = TfidfVocabulary::fit(docs, 2);
  EXPECT_EQ(v.size(), 2u);
  EXPECT_GE(v.index("x"), 0);
  EXPECT_GE(v.index("y"), 0);
  EXPECT_EQ(v.index("z"), -1);
}

TEST(KeywordFallback, Examples) {
  EXPECT_EQ(classify_keyword_fallback("Bugfix for issue 12"), CommitClass::DefectFix);
  EXPECT_EQ(classify_keyword_fallback("Add feature flags"), CommitClass::NonDefect);
  EXPECT_EQ(classify_keyword_fallback("refactor tests"), CommitClass::NonDefect);
  EXPECT_EQ(classify_keyword_fallback("Repair the flaky parser"), CommitClass::DefectFix);
}

TEST(Classifier, SeparableCorpusCrossValidation) {
  auto corpus = tcptest::keyword_corpus(500);
  auto trained = train_classifier(corpus, 5);
  EXPECT_GE(trained.cv_accuracy, 0.95);
  ASSERT_EQ(trained.fold_accuracy.size(), 5u);
  EXPECT_NEAR(tcptest::mean(trained.fold_accuracy), trained.cv_accuracy, 0.02);

  EXPECT_EQ(trained.model.classify("fix crash in parser"), CommitClass::DefectFix);
  EXPECT_EQ(trained.model.classify(""), CommitClass::NonDefect);
  std::size_t agree = 0;
  for (const auto& m : corpus) agree += trained.model.classify(m.message) == m.label;
  EXPECT_EQ(agree, corpus.size());
}

TEST(Classifier, SingleClassCorpusIsDegenerate) {
  std::vector<LabeledMessage> corpus(20, {"add things", CommitClass::NonDefect});
  try {
    train_classifier(corpus, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateCorpus);
  }
}

TEST(Classifier, JsonRoundTrip) {
  auto clf = fit_classifier(tcptest::keyword_corpus(200));
  auto back = CommitClassifier::from_json(clf.to_json());
  EXPECT_EQ(back.to_json(), clf.to_json());
  for (const auto& m : tcptest::keyword_corpus(50, 99))
    EXPECT_DOUBLE_EQ(back.probability(m.message), clf.probability(m.message));
}

TEST(Classifier, LoadsLabeledCsv) {
  tcptest::TempDir dir;
  tcptest::write_file(dir / "c.csv", "message,label\n\"fix, now\",1\nadd docs,0\n");
  auto corpus = load_labeled_corpus(dir / "c.csv");
  ASSERT_EQ(corpus.size(), 2u);
  EXPECT_EQ(corpus[0].message, "fix, now");
  EXPECT_EQ(corpus[0].label, CommitClass::DefectFix);
  tcptest::write_file(dir / "bad.csv", "message,label\nx,7\n");
  EXPECT_THROW(load_labeled_corpus(dir / "bad.csv"), Error);
}
