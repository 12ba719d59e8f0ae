#include "tcp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "json_io.hpp"
#include "tcp/csv.hpp"
#include "tcp/random.hpp"

namespace tcp {
namespace {

using detail::json;

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, fmt::format("cannot write {}", path.string()));
  return out;
}

std::vector<double> labels_of(const FeatureMatrix& m, const Build& build) {
  std::unordered_map<TestId, bool> failed;
  for (const auto& r : build.records) failed[r.test] = is_failed(r.verdict);
  std::vector<double> y;
  y.reserve(m.rows.size());
  for (const auto& row : m.rows) y.push_back(failed.at(row.test) ? 1.0 : 0.0);
  return y;
}

StrategySummary summarize(const std::vector<double>& values) {
  StrategySummary s;
  s.builds = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace

Ordering optimal_ordering(const Build& build) {
  std::vector<const ExecutionRecord*> recs;
  for (const auto& r : build.records) recs.push_back(&r);
  std::sort(recs.begin(), recs.end(), [](const ExecutionRecord* a, const ExecutionRecord* b) {
    const bool fa = is_failed(a->verdict), fb = is_failed(b->verdict);
    if (fa != fb) return fa;
    if (a->duration_ms != b->duration_ms) return a->duration_ms < b->duration_ms;
    return a->test < b->test;
  });
  Ordering o{build.id, {}, {}};
  for (std::size_t i = 0; i < recs.size(); ++i) {
    o.tests.push_back(recs[i]->test);
    o.scores.push_back(static_cast<double>(recs.size() - i));
  }
  return o;
}

double apfdc(const std::vector<bool>& failed, const std::vector<double>& durations) {
  if (failed.size() != durations.size()) throw Error(Errc::Invariant, "verdict and duration counts differ");
  const bool unit = std::all_of(durations.begin(), durations.end(), [](double d) { return d == 0.0; });
  std::vector<double> t(durations.size());
  for (std::size_t j = 0; j < t.size(); ++j) t[j] = unit ? 1.0 : durations[j];
  // suffix[j] = t_j + ... + t_n
  std::vector<double> suffix(t.size() + 1, 0.0);
  for (std::size_t j = t.size(); j-- > 0;) suffix[j] = suffix[j + 1] + t[j];
  double numerator = 0.0;
  std::size_t m = 0;
  for (std::size_t j = 0; j < t.size(); ++j)
    if (failed[j]) {
      numerator += suffix[j] - t[j] / 2.0;
      ++m;
    }
  if (m == 0) throw Error(Errc::NoFailures, "APFD_C is undefined for a build without failures");
  return numerator / (suffix[0] * static_cast<double>(m));
}

double apfdc(const std::vector<TestId>& order, const Build& build) {
  std::unordered_map<TestId, const ExecutionRecord*> by_test;
  for (const auto& r : build.records) by_test.emplace(r.test, &r);
  std::vector<bool> failed;
  std::vector<double> durations;
  for (const auto& t : order) {
    auto it = by_test.find(t);
    if (it == by_test.end()) continue;
    failed.push_back(is_failed(it->second->verdict));
    durations.push_back(it->second->duration_ms);
    by_test.erase(it);
  }
  if (!by_test.empty())
    throw Error(Errc::Invariant, fmt::format("ordering misses {} test(s) of build {}", by_test.size(), build.id.ordinal));
  return apfdc(failed, durations);
}

double three_sigma_threshold(const std::vector<double>& counts) {
  if (counts.size() < 2) return std::numeric_limits<double>::infinity();
  const double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / static_cast<double>(counts.size());
  double ss = 0.0;
  for (double c : counts) ss += (c - mean) * (c - mean);
  return mean + 3.0 * std::sqrt(ss / static_cast<double>(counts.size() - 1));
}

FilteredHistory remove_frequent_failers(const BuildHistory& history) {
  FilteredHistory out{history, {}, 0.0};
  std::map<TestId, double> counts;
  for (const auto& b : history.builds)
    for (const auto& r : b.records) counts[r.test] += is_failed(r.verdict) ? 1.0 : 0.0;
  std::vector<double> values;
  for (const auto& [t, c] : counts) values.push_back(c);
  out.threshold = three_sigma_threshold(values);
  if (counts.size() < 2) return out;
  std::set<TestId> removed;
  for (const auto& [t, c] : counts)
    if (c > out.threshold) removed.insert(t);
  out.removed.assign(removed.begin(), removed.end());
  for (auto& b : out.history.builds)
    std::erase_if(b.records, [&](const ExecutionRecord& r) { return removed.contains(r.test); });
  return out;
}

std::string heuristic_strategy(const std::string& feature, Direction d) {
  return fmt::format("heuristic:{}:{}", feature, d == Direction::Ascending ? "asc" : "desc");
}

std::vector<TimingRow> timing_report(const std::vector<StepSeconds>& preprocessing,
                                     const std::vector<GroupSeconds>& measurement) {
  std::vector<TimingRow> rows;
  for (auto g : all_feature_groups()) {
    TimingRow row{g, 0.0, 0.0};
    for (const auto& p : preprocessing) row.preprocessing += group_preprocessing(g, p);
    for (const auto& m : measurement) row.measurement += m[static_cast<int>(g)];
    if (!preprocessing.empty()) row.preprocessing /= static_cast<double>(preprocessing.size());
    if (!measurement.empty()) row.measurement /= static_cast<double>(measurement.size());
    rows.push_back(row);
  }
  return rows;
}

EvaluationReport run_pipeline_eval(const Dataset& dataset, const EvalOptions& options, bool with_decay) {
  options.hyperparams.validate();
  if (options.max_failed_builds < 1) throw Error(Errc::InvalidConfig, "max failed builds must be at least 1");
  EvaluationReport report;
  auto filtered = remove_frequent_failers(dataset.history);
  report.removed_tests = filtered.removed;
  report.removal_threshold = filtered.threshold;

  std::vector<const Build*> failed;
  for (const auto& b : filtered.history.builds)
    if (b.failed()) failed.push_back(&b);
  if (failed.size() < 2)
    throw Error(Errc::InsufficientHistory,
                fmt::format("{} failed build(s) after filtering; at least 2 are needed", failed.size()));
  const std::size_t first_eval =
      std::max<std::size_t>(1, failed.size() - std::min<std::size_t>(options.max_failed_builds, failed.size() - 1));

  std::set<BuildId> targets;
  for (const auto* b : failed) targets.insert(b->id);
  FeaturePipeline pipeline(dataset, filtered.history, options.pipeline);
  auto prepared = pipeline.prepare(targets);

  const AssembleOptions standard{options.pipeline.impact_depth, false};
  std::vector<FeatureMatrix> matrices(failed.size());
  std::vector<std::vector<double>> labels(failed.size());
  std::vector<StepSeconds> prep_times;
  std::vector<GroupSeconds> measure_times;
  for (std::size_t i = 0; i < failed.size(); ++i) {
    const auto& pb = prepared.at(failed[i]->id);
    GroupSeconds m = pb.measurement;
    matrices[i] = assemble_feature_matrix(pb.live, *pb.snapshot, standard, &m);
    labels[i] = labels_of(matrices[i], *failed[i]);
    if (i >= first_eval) {
      prep_times.push_back(pb.preprocessing);
      measure_times.push_back(m);
    }
  }
  report.timing = timing_report(prep_times, measure_times);

  std::map<std::string, std::vector<double>> by_strategy;
  auto record = [&](BuildId b, const std::string& strategy, double v) {
    report.apfdc.push_back({b, strategy, v});
    by_strategy[strategy].push_back(v);
  };
  std::vector<RankingModel> models;
  std::vector<int> usage(kFeatureCount, 0);
  for (std::size_t k = first_eval; k < failed.size(); ++k) {
    const Build& build = *failed[k];
    std::vector<const FeatureMatrix*> train_m;
    std::vector<std::vector<double>> train_y;
    for (std::size_t i = 0; i < k; ++i) {
      train_m.push_back(&matrices[i]);
      train_y.push_back(labels[i]);
    }
    models.push_back(train(train_m, train_y, options.hyperparams, build.id, options.jobs));
    for (std::size_t c = 0; c < usage.size() && c < models.back().usage.size(); ++c) usage[c] += models.back().usage[c];

    record(build.id, kFullStrategy, apfdc(predict(models.back(), matrices[k]).tests, build));
    for (const auto& [feature, dir] : options.heuristics)
      record(build.id, heuristic_strategy(feature, dir), apfdc(heuristic_rank(matrices[k], feature, dir).tests, build));
    record(build.id, kOptimalStrategy, apfdc(optimal_ordering(build).tests, build));
    auto shuffled = build.tests();
    Rng rng(mix_seed(options.hyperparams.seed, static_cast<std::uint64_t>(build.id.ordinal)));
    shuffle(shuffled, rng);
    record(build.id, kRandomStrategy, apfdc(shuffled, build));
  }
  for (const auto& [s, v] : by_strategy) report.summary[s] = summarize(v);
  const auto& catalog = FeatureCatalog::standard();
  for (int c = 0; c < kFeatureCount; ++c) report.feature_usage.emplace_back(catalog[c].name, usage[c]);

  if (with_decay) {
    const AssembleOptions frozen{options.pipeline.impact_depth, true};
    std::map<int, std::vector<double>> by_rw;
    for (std::size_t k = first_eval; k < failed.size(); ++k) {
      const auto& model = models[k - first_eval];
      const auto& snapshot = *prepared.at(failed[k]->id).snapshot;
      for (std::size_t i = k; i < failed.size(); ++i) {
        const int rw = static_cast<int>(i - k);
        double v;
        if (rw == 0) {
          v = apfdc(predict(model, matrices[k]).tests, *failed[k]);
        } else {
          auto m = assemble_feature_matrix(prepared.at(failed[i]->id).live, snapshot, frozen);
          v = apfdc(predict(model, m).tests, *failed[i]);
        }
        by_rw[rw].push_back(v);
        report.decay_pairs.push_back(
            {failed[i]->id, fmt::format("rw={},model={}", rw, failed[k]->id.ordinal), v});
      }
    }
    for (const auto& [rw, values] : by_rw)
      report.decay.push_back({rw, std::accumulate(values.begin(), values.end(), 0.0) / values.size(), values.size()});
  }
  return report;
}

EvaluationReport decay_experiment(const Dataset& dataset, const EvalOptions& options) {
  return run_pipeline_eval(dataset, options, true);
}

double decay_slope(const std::vector<DecayPoint>& curve, int lo, int hi) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : curve) {
    if (p.rw < lo || p.rw > hi || p.pairs == 0) continue;
    n += 1;
    sx += p.rw;
    sy += p.mean_apfdc;
    sxx += static_cast<double>(p.rw) * p.rw;
    sxy += p.rw * p.mean_apfdc;
  }
  const double denom = n * sxx - sx * sx;
  if (n < 2 || denom == 0.0) throw Error(Errc::InsufficientHistory, "decay curve has fewer than two points in range");
  return (n * sxy - sx * sy) / denom;
}

void write_apfdc_csv(const std::filesystem::path& path, const EvaluationReport& report) {
  auto out = open_out(path);
  csv::write_row(out, {"build_id", "strategy", "apfdc"});
  for (const auto& r : report.apfdc)
    csv::write_row(out, {std::to_string(r.build.ordinal), r.strategy, fmt::format("{}", r.value)});
}

void write_timing_csv(const std::filesystem::path& path, const EvaluationReport& report) {
  auto out = open_out(path);
  csv::write_row(out, {"group", "P", "M", "T"});
  for (const auto& r : report.timing)
    csv::write_row(out, {std::string(group_name(r.group)), fmt::format("{}", r.preprocessing),
                         fmt::format("{}", r.measurement), fmt::format("{}", r.total())});
}

void write_decay_csv(const std::filesystem::path& path, const EvaluationReport& report) {
  auto out = open_out(path);
  csv::write_row(out, {"rw", "mean_apfdc", "n_pairs"});
  for (const auto& p : report.decay)
    csv::write_row(out, {std::to_string(p.rw), fmt::format("{}", p.mean_apfdc), std::to_string(p.pairs)});
}

void write_report_json(const std::filesystem::path& path, const EvaluationReport& report,
                       const std::string& config_json) {
  json summary = json::object();
  for (const auto& [s, v] : report.summary) summary[s] = {{"mean", v.mean}, {"sd", v.sd}, {"builds", v.builds}};
  json removed = json::array();
  for (const auto& t : report.removed_tests) removed.push_back(t.path());
  json usage = json::object();
  for (const auto& [name, count] : report.feature_usage) usage[name] = count;
  json timing = json::array();
  for (const auto& r : report.timing)
    timing.push_back({{"group", group_name(r.group)}, {"P", r.preprocessing}, {"M", r.measurement}, {"T", r.total()}});
  json j = {{"config", config_json.empty() ? json::object() : json::parse(config_json)},
            {"summary", summary},
            {"expected_random", report.expected_random},
            {"removed_tests", removed},
            {"removal_threshold", std::isfinite(report.removal_threshold) ? json(report.removal_threshold) : json()},
            {"timing", timing},
            {"feature_usage", usage}};
  if (!report.decay.empty()) {
    json decay = json::array();
    for (const auto& p : report.decay) decay.push_back({{"rw", p.rw}, {"mean_apfdc", p.mean_apfdc}, {"n_pairs", p.pairs}});
    j["decay"] = decay;
  }
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

}  // namespace tcp
