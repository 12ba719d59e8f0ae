// tcp_engine: batch front end for dataset ingest, feature extraction,
// training, prioritization, evaluation and synthetic data generation.
//
// stdout carries the payload of a command (paths, rankings, JSON); every
// diagnostic goes to stderr. Failures print one "error: <Kind>: <message>"
// line and exit with 2 (input), 3 (insufficient history) or 4 (internal).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "tcp/catalog.hpp"
#include "tcp/classifier.hpp"
#include "tcp/evaluation.hpp"
#include "tcp/features.hpp"
#include "tcp/git.hpp"
#include "tcp/ingest.hpp"
#include "tcp/log.hpp"
#include "tcp/pipeline.hpp"
#include "tcp/ranker.hpp"
#include "tcp/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Effective settings of one run. Defaults < config file < flags.
struct RunConfig {
  fs::path dataset;
  int impact_depth = 1;
  int recent = 6;
  tcp::Hyperparams hyperparams;
  int max_failed_builds = 50;
  std::string classifier = "keywords";  // or a trained model path
  std::vector<std::string> heuristics = {"F_FailRate_Total:desc"};
  int jobs = 1;

  json to_json() const {
    return {{"dataset", dataset.generic_string()},
            {"impact_depth", impact_depth},
            {"recent", recent},
            {"seed", hyperparams.seed},
            {"max_failed_builds", max_failed_builds},
            {"classifier", classifier},
            {"heuristics", heuristics},
            {"jobs", jobs},
            {"hyperparams",
             {{"bag", hyperparams.bag},
              {"trees_per_bag", hyperparams.trees_per_bag},
              {"max_leaves", hyperparams.max_leaves},
              {"shrinkage", hyperparams.shrinkage},
              {"sample_rate", hyperparams.sample_rate},
              {"feature_rate", hyperparams.feature_rate}}}};
  }
};

// Flag values; unset ones leave the config-file value alone.
struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs, depth, recent, max_builds;
  std::optional<std::string> classifier;
  std::optional<int> bag, trees, leaves;
  std::optional<double> shrinkage, sample_rate, feature_rate;
  std::vector<std::string> heuristics;
};

tcp::Error bad_config(const std::string& what) { return tcp::Error(tcp::Errc::InvalidConfig, what); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw tcp::Error(tcp::Errc::Io, fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void apply_config_file(RunConfig& rc, const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw bad_config(fmt::format("{}: {}", path.string(), e.what()));
  }
  if (!j.is_object()) throw bad_config(fmt::format("{}: expected a JSON object", path.string()));
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "impact_depth") rc.impact_depth = v.get<int>();
      else if (key == "recent") rc.recent = v.get<int>();
      else if (key == "seed") rc.hyperparams.seed = v.get<std::uint64_t>();
      else if (key == "max_failed_builds") rc.max_failed_builds = v.get<int>();
      else if (key == "classifier") rc.classifier = v.get<std::string>();
      else if (key == "heuristics") rc.heuristics = v.get<std::vector<std::string>>();
      else if (key == "jobs") rc.jobs = v.get<int>();
      else if (key == "hyperparams") {
        auto& hp = rc.hyperparams;
        for (const auto& [hk, hv] : v.items()) {
          if (hk == "bag") hp.bag = hv.get<int>();
          else if (hk == "trees_per_bag") hp.trees_per_bag = hv.get<int>();
          else if (hk == "max_leaves") hp.max_leaves = hv.get<int>();
          else if (hk == "shrinkage") hp.shrinkage = hv.get<double>();
          else if (hk == "sample_rate") hp.sample_rate = hv.get<double>();
          else if (hk == "feature_rate") hp.feature_rate = hv.get<double>();
          else throw bad_config(fmt::format("{}: unknown hyperparameter '{}'", path.string(), hk));
        }
      } else {
        throw bad_config(fmt::format("{}: unknown key '{}'", path.string(), key));
      }
    }
  } catch (const json::type_error& e) {
    throw bad_config(fmt::format("{}: {}", path.string(), e.what()));
  }
}

RunConfig resolve(const fs::path& dataset, const Flags& f) {
  RunConfig rc;
  rc.dataset = dataset;
  if (!f.config.empty()) apply_config_file(rc, f.config);
  if (f.seed) rc.hyperparams.seed = *f.seed;
  if (f.jobs) rc.jobs = *f.jobs;
  if (f.depth) rc.impact_depth = *f.depth;
  if (f.recent) rc.recent = *f.recent;
  if (f.max_builds) rc.max_failed_builds = *f.max_builds;
  if (f.classifier) rc.classifier = *f.classifier;
  if (f.bag) rc.hyperparams.bag = *f.bag;
  if (f.trees) rc.hyperparams.trees_per_bag = *f.trees;
  if (f.leaves) rc.hyperparams.max_leaves = *f.leaves;
  if (f.shrinkage) rc.hyperparams.shrinkage = *f.shrinkage;
  if (f.sample_rate) rc.hyperparams.sample_rate = *f.sample_rate;
  if (f.feature_rate) rc.hyperparams.feature_rate = *f.feature_rate;
  if (!f.heuristics.empty()) rc.heuristics = f.heuristics;

  if (rc.impact_depth < 1) throw bad_config("impact depth must be at least 1");
  if (rc.recent < 1) throw bad_config("recent window must be at least 1");
  if (rc.jobs < 1) throw bad_config("jobs must be at least 1");
  rc.hyperparams.validate();
  return rc;
}

tcp::PipelineOptions pipeline_options(const RunConfig& rc) {
  tcp::PipelineOptions o;
  o.window.recent_size = rc.recent;
  o.impact_depth = rc.impact_depth;
  if (rc.classifier != "keywords") {
    auto clf = std::make_shared<tcp::CommitClassifier>(tcp::CommitClassifier::load(rc.classifier));
    o.classifier = [clf](std::string_view message) { return clf->classify(message); };
  }
  return o;
}

tcp::EvalOptions eval_options(const RunConfig& rc) {
  tcp::EvalOptions o;
  o.hyperparams = rc.hyperparams;
  o.pipeline = pipeline_options(rc);
  o.max_failed_builds = rc.max_failed_builds;
  o.jobs = rc.jobs;
  o.heuristics.clear();
  for (const auto& h : rc.heuristics) {
    auto parsed = tcp::parse_heuristic(h);
    tcp::FeatureCatalog::standard().require(parsed.first);
    o.heuristics.push_back(parsed);
  }
  return o;
}

void add_run_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration; flags override it")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--jobs", f.jobs, "Worker threads");
  cmd->add_option("--depth", f.depth, "Impacted-file search depth");
  cmd->add_option("--recent", f.recent, "Recent-execution window");
  cmd->add_option("--classifier", f.classifier, "'keywords' or a trained classifier JSON");
  cmd->add_option("--bag", f.bag, "Bags in the ensemble");
  cmd->add_option("--trees", f.trees, "Boosted trees per bag");
  cmd->add_option("--leaves", f.leaves, "Maximum leaves per tree");
  cmd->add_option("--shrinkage", f.shrinkage, "Boosting shrinkage");
  cmd->add_option("--sample-rate", f.sample_rate, "Row sampling rate per bag");
  cmd->add_option("--feature-rate", f.feature_rate, "Feature sampling rate per bag");
}

const tcp::Build& require_build(const tcp::Dataset& ds, std::int64_t id) {
  const auto* b = ds.history.find(tcp::BuildId{id});
  if (!b) throw tcp::Error(tcp::Errc::SchemaError, fmt::format("build {} is not in the dataset", id));
  if (b->records.empty()) throw tcp::Error(tcp::Errc::EmptyBuild, fmt::format("build {} executed no tests", id));
  return *b;
}

tcp::FeatureMatrix matrix_for(const tcp::Dataset& ds, const tcp::BuildHistory& history, tcp::BuildId id,
                              const RunConfig& rc) {
  tcp::FeaturePipeline pipeline(ds, history, pipeline_options(rc));
  auto prepared = pipeline.prepare({id});
  const auto& pb = prepared.at(id);
  return tcp::assemble_feature_matrix(pb.live, *pb.snapshot, {rc.impact_depth, false});
}

// ---------------------------------------------------------------------------

int cmd_ingest(const fs::path& repo, const fs::path& dataset, const fs::path& out) {
  tcp::GitRepo git(repo);
  tcp::DatasetLayout src;
  src.root = dataset;
  auto history = tcp::ingest_exec_records(src);
  auto commits = git.log("HEAD");

  tcp::DatasetLayout dst;
  dst.root = out.empty() ? dataset : out;
  dst.repo = fs::absolute(repo);
  fs::create_directories(dst.root);
  tcp::write_commits_jsonl(dst.commits_jsonl(), commits);
  tcp::write_history(dst, history);
  tcp::write_dataset_json(dst);

  auto ds = tcp::load_dataset(dst.root);  // validates commit references and invariants
  std::size_t records = 0;
  for (const auto& b : ds.history.builds) records += b.records.size();
  std::cerr << fmt::format("ingested {} builds, {} records, {} commits\n", ds.history.builds.size(), records,
                           ds.commits.size());
  std::cout << fs::absolute(dst.root).generic_string() << '\n';
  return 0;
}

int cmd_extract(const RunConfig& rc, std::int64_t build, const fs::path& out) {
  auto ds = tcp::load_dataset(rc.dataset);
  require_build(ds, build);
  auto m = matrix_for(ds, ds.history, tcp::BuildId{build}, rc);
  fs::path path = out.empty() ? rc.dataset / "features" : out;
  path /= fmt::format("build_{}.csv", build);
  tcp::write_feature_csv(path, m);
  std::cout << path.generic_string() << '\n';
  return 0;
}

int cmd_train(const RunConfig& rc, std::int64_t until, const fs::path& out) {
  auto ds = tcp::load_dataset(rc.dataset);
  tcp::BuildHistory before;
  for (const auto& b : ds.history.builds)
    if (b.id.ordinal < until) before.builds.push_back(b);
  auto filtered = tcp::remove_frequent_failers(before);
  if (!filtered.removed.empty())
    tcp::warn(fmt::format("{} frequently failing test(s) removed (threshold {:.3f})", filtered.removed.size(),
                          filtered.threshold));

  std::set<tcp::BuildId> targets;
  for (const auto& b : filtered.history.builds)
    if (b.failed()) targets.insert(b.id);
  if (targets.empty())
    throw tcp::Error(tcp::Errc::NoFailedBuilds, fmt::format("no failed build before {}", until));

  tcp::FeaturePipeline pipeline(ds, filtered.history, pipeline_options(rc));
  auto prepared = pipeline.prepare(targets);
  std::vector<tcp::FeatureMatrix> matrices;
  std::vector<std::vector<double>> labels;
  for (const auto& id : targets) {
    const auto& pb = prepared.at(id);
    matrices.push_back(tcp::assemble_feature_matrix(pb.live, *pb.snapshot, {rc.impact_depth, false}));
    std::unordered_map<tcp::TestId, bool> failed;
    for (const auto& r : filtered.history.find(id)->records) failed[r.test] = tcp::is_failed(r.verdict);
    auto& y = labels.emplace_back();
    for (const auto& row : matrices.back().rows) y.push_back(failed.at(row.test) ? 1.0 : 0.0);
  }
  std::vector<const tcp::FeatureMatrix*> ptrs;
  for (const auto& m : matrices) ptrs.push_back(&m);
  auto model = tcp::train(ptrs, labels, rc.hyperparams, tcp::BuildId{until}, rc.jobs);
  model.save(out);
  std::cerr << fmt::format("trained on {} failed build(s), {} bag(s)\n", targets.size(), model.bags.size());
  std::cout << out.generic_string() << '\n';
  return 0;
}

int cmd_prioritize(const RunConfig& rc, std::int64_t build, const fs::path& model_path) {
  auto model = tcp::RankingModel::load(model_path);
  auto ds = tcp::load_dataset(rc.dataset);
  require_build(ds, build);
  auto m = matrix_for(ds, ds.history, tcp::BuildId{build}, rc);
  for (const auto& t : tcp::predict(model, m).tests) std::cout << t.path() << '\n';
  return 0;
}

void write_outputs(const fs::path& dir, const tcp::EvaluationReport& report, const RunConfig& rc, bool decay) {
  fs::create_directories(dir);
  tcp::write_apfdc_csv(dir / "apfdc.csv", report);
  tcp::write_timing_csv(dir / "timing.csv", report);
  if (decay) tcp::write_decay_csv(dir / "decay.csv", report);
  tcp::write_report_json(dir / "report.json", report, rc.to_json().dump());
}

int cmd_evaluate(const RunConfig& rc, const fs::path& out) {
  auto ds = tcp::load_dataset(rc.dataset);
  auto report = tcp::run_pipeline_eval(ds, eval_options(rc));
  const fs::path dir = out.empty() ? rc.dataset / "eval" : out;
  write_outputs(dir, report, rc, false);
  for (const auto& [name, s] : report.summary)
    std::cout << fmt::format("{}\t{:.4f}\t{:.4f}\t{}\n", name, s.mean, s.sd, s.builds);
  std::cout << fmt::format("expected_random\t{:.4f}\n", report.expected_random);
  return 0;
}

int cmd_decay(const RunConfig& rc, const fs::path& out) {
  auto ds = tcp::load_dataset(rc.dataset);
  auto report = tcp::decay_experiment(ds, eval_options(rc));
  const fs::path dir = out.empty() ? rc.dataset / "decay" : out;
  write_outputs(dir, report, rc, true);
  for (const auto& p : report.decay) std::cout << fmt::format("{}\t{:.4f}\t{}\n", p.rw, p.mean_apfdc, p.pairs);
  const int hi = std::min(11, report.decay.empty() ? 0 : report.decay.back().rw);
  if (hi > 0) std::cerr << fmt::format("slope over rw 0..{}: {:.5f}\n", hi, tcp::decay_slope(report.decay, 0, hi));
  return 0;
}

int cmd_synth(const fs::path& config, std::uint64_t seed, const fs::path& out) {
  tcp::SynthConfig cfg = config.empty() ? tcp::SynthConfig{} : tcp::SynthConfig::load(config);
  auto result = tcp::generate_synthetic_history(cfg, seed, out);
  std::cout << fs::absolute(result.layout.root).generic_string() << '\n';
  return 0;
}

int cmd_train_classifier(const fs::path& corpus, const fs::path& out, int folds, std::uint64_t seed) {
  tcp::ClassifierOptions opts;
  opts.seed = seed;
  auto trained = tcp::train_classifier(tcp::load_labeled_corpus(corpus), folds, opts);
  trained.model.save(out);
  std::cout << fmt::format("cv_accuracy\t{:.4f}\n", trained.cv_accuracy);
  for (std::size_t i = 0; i < trained.fold_accuracy.size(); ++i)
    std::cout << fmt::format("fold_{}\t{:.4f}\n", i + 1, trained.fold_accuracy[i]);
  return 0;
}

int cmd_graph(const RunConfig& rc, std::int64_t build) {
  auto ds = tcp::load_dataset(rc.dataset);
  require_build(ds, build);
  tcp::FeaturePipeline pipeline(ds, ds.history, pipeline_options(rc));
  auto prepared = pipeline.prepare({tcp::BuildId{build}});
  std::cout << prepared.at(tcp::BuildId{build}).snapshot->graph.to_json() << '\n';
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Learning-to-rank test case prioritization for CI histories", "tcp_engine"};
  app.require_subcommand(1);
  Flags flags;
  fs::path dataset, out, repo, model, synth_config, corpus;
  std::int64_t build = 0;
  std::uint64_t synth_seed = 1;
  int folds = 5;

  auto* ingest = app.add_subcommand("ingest", "Validate and normalize a dataset against its git repository");
  ingest->add_option("repo", repo, "Git repository")->required();
  ingest->add_option("dataset", dataset, "Dataset directory with builds.csv and exec_records.csv")->required();
  ingest->add_option("--out", out, "Write the normalized dataset here instead of in place");

  auto* extract = app.add_subcommand("extract", "Write the feature matrix of one build");
  extract->add_option("dataset", dataset)->required();
  extract->add_option("--build", build, "Build id")->required();
  extract->add_option("--out", out, "Output directory (default <dataset>/features)");
  add_run_flags(extract, flags);

  auto* train = app.add_subcommand("train", "Train a ranking model on failed builds before --until");
  train->add_option("dataset", dataset)->required();
  train->add_option("--until", build, "First build excluded from training")->required();
  train->add_option("--out", out, "Model JSON")->required();
  add_run_flags(train, flags);

  auto* prioritize = app.add_subcommand("prioritize", "Print the tests of a build in ranked order");
  prioritize->add_option("dataset", dataset)->required();
  prioritize->add_option("--build", build, "Build id")->required();
  prioritize->add_option("--model", model, "Model JSON")->required()->check(CLI::ExistingFile);
  add_run_flags(prioritize, flags);

  auto* evaluate = app.add_subcommand("evaluate", "Per-build train/predict evaluation");
  evaluate->add_option("dataset", dataset)->required();
  evaluate->add_option("--heuristic", flags.heuristics, "Single-feature baseline, e.g. F_FailRate_Total:desc");
  evaluate->add_option("--max-builds", flags.max_builds, "Latest failed builds evaluated");
  evaluate->add_option("--out", out, "Output directory (default <dataset>/eval)");
  add_run_flags(evaluate, flags);

  auto* decay = app.add_subcommand("decay", "Model decay over the retraining window");
  decay->add_option("dataset", dataset)->required();
  decay->add_option("--max-builds", flags.max_builds, "Latest failed builds evaluated");
  decay->add_option("--out", out, "Output directory (default <dataset>/decay)");
  add_run_flags(decay, flags);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--config", synth_config, "Generator configuration JSON")->check(CLI::ExistingFile);
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--out", out, "Output directory (absent or empty)")->required();

  auto* train_clf = app.add_subcommand("train-classifier", "Train the commit-message classifier");
  train_clf->add_option("corpus", corpus, "CSV with label and message columns")->required()->check(CLI::ExistingFile);
  train_clf->add_option("--out", out, "Classifier JSON")->required();
  train_clf->add_option("--folds", folds, "Cross-validation folds");
  train_clf->add_option("--seed", synth_seed, "Random seed");

  auto* graph = app.add_subcommand("graph", "Print the dependency graph of one build as JSON");
  graph->add_option("dataset", dataset)->required();
  graph->add_option("--build", build, "Build id")->required();
  add_run_flags(graph, flags);

  app.add_subcommand("catalog", "Print the feature catalog as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: UsageError: " << e.what() << '\n';
    return 2;
  }

  auto* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  if (name == "ingest") return cmd_ingest(repo, dataset, out);
  if (name == "synth") return cmd_synth(synth_config, synth_seed, out);
  if (name == "train-classifier") return cmd_train_classifier(corpus, out, folds, synth_seed);
  if (name == "catalog") {
    std::cout << tcp::FeatureCatalog::standard().to_csv();
    return 0;
  }
  const RunConfig rc = resolve(dataset, flags);
  if (name == "extract") return cmd_extract(rc, build, out);
  if (name == "train") return cmd_train(rc, build, out);
  if (name == "prioritize") return cmd_prioritize(rc, build, model);
  if (name == "evaluate") return cmd_evaluate(rc, out);
  if (name == "decay") return cmd_decay(rc, out);
  if (name == "graph") return cmd_graph(rc, build);
  throw tcp::Error(tcp::Errc::Invariant, "unhandled subcommand " + name);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const tcp::Error& e) {
    std::cerr << "error: " << tcp::errc_name(e.code()) << ": " << e.what() << '\n';
    return tcp::exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: Io: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << '\n';
    return 4;
  }
}
