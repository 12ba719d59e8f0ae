#include "tcp/pipeline.hpp"

#include <chrono>

#include <fmt/format.h>

#include "tcp/classifier.hpp"
#include "tcp/log.hpp"

namespace tcp {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double& step(StepSeconds& s, PrepStep p) { return s[static_cast<int>(p)]; }

}  // namespace

double group_preprocessing(FeatureGroup group, const StepSeconds& s) {
  auto at = [&](PrepStep p) { return s[static_cast<int>(p)]; };
  const double coverage = at(PrepStep::StaticAnalysis) + at(PrepStep::CoChange) + at(PrepStep::Graph);
  switch (group) {
    case FeatureGroup::TES_COM: return at(PrepStep::StaticAnalysis);
    case FeatureGroup::TES_PRO: return at(PrepStep::ProcessMining);
    case FeatureGroup::TES_CHN: return 0.0;
    case FeatureGroup::REC: return at(PrepStep::ExecIndex);
    case FeatureGroup::F_COV:
    case FeatureGroup::COD_COV_COM:
    case FeatureGroup::COD_COV_CHN: return coverage;
    case FeatureGroup::COD_COV_PRO: return coverage + at(PrepStep::ProcessMining);
    case FeatureGroup::DET_COV: return coverage + at(PrepStep::Pdf);
  }
  return 0.0;
}

FeaturePipeline::FeaturePipeline(const Dataset& dataset, const BuildHistory& history, PipelineOptions options)
    : dataset_(dataset), history_(history), options_(std::move(options)) {
  if (options_.impact_depth < 1) throw Error(Errc::InvalidConfig, "impact depth must be at least 1");
  if (options_.window.recent_size < 1) throw Error(Errc::InvalidConfig, "recent window must be at least 1");
  if (!options_.classifier) options_.classifier = classify_keyword_fallback;
  if (dataset_.layout.repo) repo_.emplace(*dataset_.layout.repo);
}

std::shared_ptr<const Snapshot> FeaturePipeline::snapshot(BuildId build, const CommitId& head,
                                                          const CoChangeIndex& cochange, const ProcessIndex& process,
                                                          const PdfTable& pdf, StepSeconds& steps) {
  auto s = std::make_shared<Snapshot>();
  s->build = build;
  s->commit = head;
  s->graph.built_at = build;
  if (repo_ && !head.empty()) {
    auto t0 = Clock::now();
    std::vector<TreeEntry> files;
    for (auto& e : repo_->tree(head))
      if (options_.analyzer.accepts(e.path)) files.push_back(std::move(e));
    std::vector<std::string> missing;
    for (const auto& e : files)
      if (!facts_.contains(e.blob)) missing.push_back(e.blob);
    for (std::size_t i = 0; i < missing.size(); i += 512) {
      std::vector<std::string> batch(missing.begin() + i, missing.begin() + std::min(missing.size(), i + 512));
      for (auto& [id, text] : repo_->read_blobs(batch))
        facts_.emplace(id, std::make_shared<const FileFacts>(analyze_source(text)));
    }
    RepoIndex index;
    for (const auto& e : files) index.add(e.path, *facts_.at(e.blob));
    std::vector<SourceEntity> entities;
    entities.reserve(files.size());
    for (const auto& e : files) {
      const auto& facts = *facts_.at(e.blob);
      entities.push_back(index.resolve(e.path, facts));
      s->complexity.emplace(e.path, facts.metrics);
    }
    step(steps, PrepStep::StaticAnalysis) += seconds_since(t0);

    t0 = Clock::now();
    s->graph = build_dependency_graph(entities, cochange, build);
    step(steps, PrepStep::Graph) += seconds_since(t0);

    t0 = Clock::now();
    for (const auto& e : files) s->process.emplace(e.path, process.metrics(e.path));
    step(steps, PrepStep::ProcessMining) += seconds_since(t0);
  }
  auto t0 = Clock::now();
  s->pdf = pdf;
  step(steps, PrepStep::Pdf) += seconds_since(t0);
  return s;
}

std::map<BuildId, PreparedBuild> FeaturePipeline::prepare(const std::set<BuildId>& targets) {
  std::map<BuildId, PreparedBuild> out;
  if (!repo_ && !targets.empty())
    warn("no repository configured; static and coverage features default to zero");
  ExecutionIndex exec(options_.window);
  CoChangeIndex cochange;
  ProcessIndex process;
  PdfTable pdf;
  CommitId head;
  std::size_t next = 0;
  double exec_pending = 0.0;
  const auto& commits = dataset_.commits;
  for (std::size_t p = 0; p < history_.builds.size(); ++p) {
    const Build& b = history_.builds[p];
    if (targets.empty() || b.id > *targets.rbegin()) break;
    StepSeconds steps{};
    std::size_t upto = next;
    for (const auto& id : b.change_set.commits) {
      auto it = dataset_.commit_index.find(id);
      if (it == dataset_.commit_index.end())
        throw Error(Errc::SchemaError, fmt::format("build {} references unknown commit {}", b.id.ordinal, id));
      upto = std::max(upto, it->second + 1);
    }
    for (; next < upto; ++next) {
      const Commit& c = commits[next];
      auto t0 = Clock::now();
      cochange.add(c);
      step(steps, PrepStep::CoChange) += seconds_since(t0);
      t0 = Clock::now();
      process.add(c);
      step(steps, PrepStep::ProcessMining) += seconds_since(t0);
      t0 = Clock::now();
      pdf.add(c, options_.classifier(c.message));
      step(steps, PrepStep::Pdf) += seconds_since(t0);
      head = c.id;
    }

    if (targets.contains(b.id) && !b.records.empty()) {
      PreparedBuild pb;
      step(steps, PrepStep::ExecIndex) += exec_pending;
      pb.live.build = b.id;
      pb.live.tests = b.tests();
      pb.live.changed = b.change_set.changed_files;

      auto t0 = Clock::now();
      pb.live.rec.reserve(pb.live.tests.size());
      for (const auto& t : pb.live.tests) pb.live.rec.push_back(exec.features(t, p, pb.live.changed));
      pb.measurement[static_cast<int>(FeatureGroup::REC)] += seconds_since(t0);

      t0 = Clock::now();
      std::vector<FileChange> changes;
      for (const auto& id : b.change_set.commits) {
        const auto& fcs = dataset_.commit(id).file_changes;
        changes.insert(changes.end(), fcs.begin(), fcs.end());
      }
      for (const auto& f : pb.live.changed) pb.live.change.emplace(f, compute_change_metrics(f, changes));
      const double chn = seconds_since(t0);
      pb.measurement[static_cast<int>(FeatureGroup::TES_CHN)] += chn;
      pb.measurement[static_cast<int>(FeatureGroup::COD_COV_CHN)] += chn;

      pb.snapshot = snapshot(b.id, head, cochange, process, pdf, steps);
      pb.preprocessing = steps;
      out.emplace(b.id, std::move(pb));
    }
    auto t0 = Clock::now();
    exec.add(b, p);
    exec_pending = seconds_since(t0);
  }
  return out;
}

}  // namespace tcp
