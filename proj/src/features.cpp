#include "tcp/features.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>

#include <fmt/format.h>

#include "tcp/csv.hpp"
#include "tcp/log.hpp"

namespace tcp {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct RateSums {
  double avg_time = 0, max_time = 0, fail = 0, assert_ = 0, exc = 0, transition = 0;
};

}  // namespace

ExecutionIndex::ExecutionIndex(RecWindow window) : window_(window) {
  if (window_.recent_size < 1) throw Error(Errc::InvalidConfig, "recent window must be at least 1");
}

void ExecutionIndex::add(const Build& build, std::size_t position) {
  if (build.records.empty()) return;
  for (const auto& r : build.records) {
    auto [it, fresh] = tests_.try_emplace(r.test);
    auto& s = it->second;
    if (fresh) {
      s.first_position = position;
    } else {
      auto gap = std::upper_bound(run_positions_.begin(), run_positions_.end(), s.last_position);
      if (gap != run_positions_.end() && *gap < position) s.first_position = position;
    }
    const bool failed = is_failed(r.verdict);
    const bool transition = !s.runs.empty() && s.runs.back().failed != failed;
    s.runs.push_back({failed, r.verdict, r.duration_ms});
    s.last_position = position;
    if (failed) {
      s.last_fail = position;
      ++s.fail_builds;
      for (const auto& f : build.change_set.changed_files) ++s.fail_with_file[f];
    }
    if (transition) {
      s.last_transition = position;
      ++s.transition_builds;
      for (const auto& f : build.change_set.changed_files) ++s.transition_with_file[f];
    }
  }
  run_positions_.push_back(position);
}

RecValues ExecutionIndex::features(const TestId& test, std::size_t position,
                                   const std::set<std::string>& changed) const {
  RecValues v{};
  auto it = tests_.find(test);
  if (it == tests_.end()) {
    v[1] = -1.0;  // F_LastFailAge
    v[2] = -1.0;  // F_LastTransitionAge
    v[17] = -1.0;
    v[18] = -1.0;
    return v;
  }
  const auto& s = it->second;
  auto age = [&](std::optional<std::size_t> p) {
    return p ? static_cast<double>(position) - static_cast<double>(*p) - 1.0 : -1.0;
  };
  v[0] = static_cast<double>(position - s.first_position);
  v[1] = age(s.last_fail);
  v[2] = age(s.last_transition);
  v[3] = s.runs.back().failed ? 1.0 : 0.0;
  v[4] = s.runs.back().duration;

  auto sums = [&](std::size_t from) {
    RateSums r;
    const double n = static_cast<double>(s.runs.size() - from);
    int transitions = 0;
    for (std::size_t i = from; i < s.runs.size(); ++i) {
      const auto& run = s.runs[i];
      r.avg_time += run.duration;
      r.max_time = std::max(r.max_time, run.duration);
      r.fail += run.failed;
      r.assert_ += run.verdict == Verdict::AssertionFailure;
      r.exc += run.verdict == Verdict::ExceptionFailure;
      if (i > from && run.failed != s.runs[i - 1].failed) ++transitions;
    }
    r.avg_time /= n;
    r.fail /= n;
    r.assert_ /= n;
    r.exc /= n;
    r.transition = n >= 2 ? transitions / (n - 1) : 0.0;
    return r;
  };
  const std::size_t recent = static_cast<std::size_t>(window_.recent_size);
  const RateSums rs = sums(s.runs.size() > recent ? s.runs.size() - recent : 0);
  const RateSums ts = sums(0);
  const double pairs[][2] = {{rs.avg_time, ts.avg_time}, {rs.max_time, ts.max_time},
                             {rs.fail, ts.fail},         {rs.assert_, ts.assert_},
                             {rs.exc, ts.exc},           {rs.transition, ts.transition}};
  for (int i = 0; i < 6; ++i) {
    v[5 + 2 * i] = pairs[i][0];
    v[6 + 2 * i] = pairs[i][1];
  }

  auto max_file_rate = [&](const std::unordered_map<std::string, int>& per_file, int total) {
    if (total == 0) return -1.0;
    int best = 0;
    for (const auto& f : changed) {
      auto fit = per_file.find(f);
      if (fit != per_file.end()) best = std::max(best, fit->second);
    }
    return static_cast<double>(best) / total;
  };
  v[17] = max_file_rate(s.fail_with_file, s.fail_builds);
  v[18] = max_file_rate(s.transition_with_file, s.transition_builds);
  return v;
}

namespace {

// Normalised cov_score weights over covered files in one set.
struct Weighted {
  std::vector<const std::string*> files;
  std::vector<double> weights;
};

Weighted weigh(const DependencyGraph& graph, const TestId& test, const std::set<std::string>& covered,
               const std::set<std::string>& scope) {
  Weighted w;
  std::vector<double> raw;
  for (const auto& f : covered) {
    if (!scope.contains(f)) continue;
    w.files.push_back(&f);
    raw.push_back(cov_score(graph, f, test));
  }
  w.weights = normalize_scores(raw);
  return w;
}

template <typename Lookup>
double weighted_sum(const Weighted& w, Lookup value) {
  double sum = 0.0;
  for (std::size_t i = 0; i < w.files.size(); ++i) sum += w.weights[i] * value(*w.files[i]);
  return sum;
}

}  // namespace

FeatureMatrix assemble_feature_matrix(const LiveBuild& live, const Snapshot& snapshot,
                                      const AssembleOptions& options, GroupSeconds* measurement) {
  if (live.rec.size() != live.tests.size()) throw Error(Errc::Invariant, "REC rows do not match tests");
  const auto& catalog = FeatureCatalog::standard();
  FeatureMatrix m;
  m.build = live.build;
  m.rows.resize(live.tests.size());
  for (std::size_t r = 0; r < live.tests.size(); ++r) {
    m.rows[r].build = live.build;
    m.rows[r].test = live.tests[r];
  }
  GroupSeconds local{};
  GroupSeconds& secs = measurement ? *measurement : local;
  auto range = [&](FeatureGroup g) { return catalog.group_range(g).first; };
  auto timed = [&](FeatureGroup g, auto&& body) {
    auto t0 = Clock::now();
    body(range(g));
    secs[static_cast<int>(g)] += seconds_since(t0);
  };

  const auto& graph = snapshot.graph;
  std::vector<bool> known(live.tests.size());
  std::size_t missing = 0;
  for (std::size_t r = 0; r < live.tests.size(); ++r) {
    known[r] = graph.has_node(live.tests[r].path());
    missing += !known[r];
  }
  if (missing > 0 && !options.impute_unknown)
    warn(fmt::format("build {}: {} test(s) have no static analysis; using zero defaults", live.build.ordinal,
                     missing));

  static const ComplexityMetrics kNoComplexity{};
  static const ProcessMetrics kNoProcess{};
  static const ChangeMetrics kUnchanged = [] {
    ChangeMetrics c{};
    c[ChangeMetric::DMMUnitSize] = c[ChangeMetric::DMMUnitComplexity] = c[ChangeMetric::DMMUnitInterfacing] = -1.0;
    return c;
  }();
  auto complexity_of = [&](const std::string& f) -> const ComplexityMetrics& {
    auto it = snapshot.complexity.find(f);
    return it == snapshot.complexity.end() ? kNoComplexity : it->second;
  };
  auto process_of = [&](const std::string& f) -> const ProcessMetrics& {
    auto it = snapshot.process.find(f);
    return it == snapshot.process.end() ? kNoProcess : it->second;
  };
  auto change_of = [&](const std::string& f) -> const ChangeMetrics& {
    auto it = live.change.find(f);
    return it == live.change.end() ? kUnchanged : it->second;
  };

  timed(FeatureGroup::TES_COM, [&](int base) {
    for (std::size_t r = 0; r < live.tests.size(); ++r) {
      const auto& c = complexity_of(live.tests[r].path());
      std::copy(c.values.begin(), c.values.end(), m.rows[r].values.begin() + base);
    }
  });
  timed(FeatureGroup::TES_PRO, [&](int base) {
    for (std::size_t r = 0; r < live.tests.size(); ++r) {
      const auto& p = process_of(live.tests[r].path());
      std::copy(p.values.begin(), p.values.end(), m.rows[r].values.begin() + base);
    }
  });
  timed(FeatureGroup::TES_CHN, [&](int base) {
    for (std::size_t r = 0; r < live.tests.size(); ++r) {
      const auto& c = change_of(live.tests[r].path());
      std::copy(c.values.begin(), c.values.end(), m.rows[r].values.begin() + base);
    }
  });
  timed(FeatureGroup::REC, [&](int base) {
    for (std::size_t r = 0; r < live.tests.size(); ++r)
      std::copy(live.rec[r].begin(), live.rec[r].end(), m.rows[r].values.begin() + base);
  });

  // Coverage sets feed every coverage-based group; their cost is charged to each.
  auto t0 = Clock::now();
  const auto impacted = impacted_files(graph, live.changed, options.impact_depth);
  std::vector<Weighted> in_changed(live.tests.size());
  std::vector<Weighted> in_impacted(live.tests.size());
  for (std::size_t r = 0; r < live.tests.size(); ++r) {
    if (!known[r]) continue;
    const auto covered = covered_files(graph, live.tests[r]);
    in_changed[r] = weigh(graph, live.tests[r], covered, live.changed);
    in_impacted[r] = weigh(graph, live.tests[r], covered, impacted);
  }
  const double context = seconds_since(t0);
  for (auto g : {FeatureGroup::F_COV, FeatureGroup::COD_COV_COM, FeatureGroup::COD_COV_PRO,
                 FeatureGroup::COD_COV_CHN, FeatureGroup::DET_COV})
    secs[static_cast<int>(g)] += context;

  auto sum_weights = [](const Weighted& w) { return weighted_sum(w, [](const std::string&) { return 1.0; }); };
  timed(FeatureGroup::F_COV, [&](int base) {
    for (std::size_t r = 0; r < live.tests.size(); ++r) {
      auto* v = m.rows[r].values.data() + base;
      v[0] = static_cast<double>(in_changed[r].files.size());
      v[1] = static_cast<double>(in_impacted[r].files.size());
      v[2] = sum_weights(in_changed[r]);
      v[3] = sum_weights(in_impacted[r]);
    }
  });
  timed(FeatureGroup::COD_COV_COM, [&](int base) {
    for (std::size_t r = 0; r < live.tests.size(); ++r) {
      auto* v = m.rows[r].values.data() + base;
      for (int k = 0; k < kComplexityMetricCount; ++k) {
        v[k] = weighted_sum(in_changed[r], [&](const std::string& f) { return complexity_of(f).values[k]; });
        v[kComplexityMetricCount + k] =
            weighted_sum(in_impacted[r], [&](const std::string& f) { return complexity_of(f).values[k]; });
      }
    }
  });
  timed(FeatureGroup::COD_COV_PRO, [&](int base) {
    for (std::size_t r = 0; r < live.tests.size(); ++r) {
      auto* v = m.rows[r].values.data() + base;
      for (int k = 0; k < kProcessMetricCount; ++k) {
        v[k] = weighted_sum(in_changed[r], [&](const std::string& f) { return process_of(f).values[k]; });
        v[kProcessMetricCount + k] =
            weighted_sum(in_impacted[r], [&](const std::string& f) { return process_of(f).values[k]; });
      }
    }
  });
  timed(FeatureGroup::COD_COV_CHN, [&](int base) {
    for (std::size_t r = 0; r < live.tests.size(); ++r) {
      auto* v = m.rows[r].values.data() + base;
      for (int k = 0; k < kChangeMetricCount; ++k)
        v[k] = weighted_sum(in_changed[r], [&](const std::string& f) {
          return std::max(0.0, change_of(f).values[k]);  // DMM -1 adds nothing
        });
    }
  });
  timed(FeatureGroup::DET_COV, [&](int base) {
    for (std::size_t r = 0; r < live.tests.size(); ++r) {
      auto* v = m.rows[r].values.data() + base;
      v[0] = weighted_sum(in_changed[r], [&](const std::string& f) { return double(snapshot.pdf[f]); });
      v[1] = weighted_sum(in_impacted[r], [&](const std::string& f) { return double(snapshot.pdf[f]); });
    }
  });

  if (options.impute_unknown && missing > 0) {
    const std::size_t n_known = live.tests.size() - missing;
    for (auto g : all_feature_groups()) {
      if (g == FeatureGroup::TES_CHN || g == FeatureGroup::REC) continue;
      auto [lo, hi] = catalog.group_range(g);
      for (int c = lo; c < hi; ++c) {
        double mean = 0.0;
        if (n_known > 0) {
          for (std::size_t r = 0; r < live.tests.size(); ++r)
            if (known[r]) mean += m.rows[r].values[c];
          mean /= static_cast<double>(n_known);
        }
        for (std::size_t r = 0; r < live.tests.size(); ++r)
          if (!known[r]) m.rows[r].values[c] = mean;
      }
    }
  }
  return m;
}

void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& matrix) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, fmt::format("cannot write {}", path.string()));
  const auto& catalog = FeatureCatalog::standard();
  csv::Row header = {"build_id", "test_path"};
  for (const auto& d : catalog.defs()) header.push_back(d.name);
  csv::write_row(out, header);
  for (const auto& row : matrix.rows) {
    csv::Row fields = {std::to_string(row.build.ordinal), row.test.path()};
    for (double v : row.values) fields.push_back(fmt::format("{}", v));
    csv::write_row(out, fields);
  }
}

FeatureMatrix read_feature_csv(const std::filesystem::path& path) {
  auto table = csv::read_file(path);
  if (table.header.size() != 2 + kFeatureCount)
    throw Error(Errc::CatalogMismatch, fmt::format("{}: expected {} columns", path.string(), 2 + kFeatureCount));
  const auto& catalog = FeatureCatalog::standard();
  for (int i = 0; i < kFeatureCount; ++i)
    if (table.header[2 + i] != catalog[i].name)
      throw Error(Errc::CatalogMismatch, fmt::format("{}: column {} is {}, expected {}", path.string(), 2 + i,
                                                     table.header[2 + i], catalog[i].name));
  FeatureMatrix m;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (row.size() != table.header.size())
      throw Error(Errc::SchemaError, fmt::format("{}:{}: wrong number of fields", path.string(), table.line_numbers[i]));
    FeatureVector v;
    std::from_chars(row[0].data(), row[0].data() + row[0].size(), v.build.ordinal);
    v.test = TestId(row[1]);
    for (int k = 0; k < kFeatureCount; ++k) {
      const auto& s = row[2 + k];
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v.values[k]);
      if (ec != std::errc())
        throw Error(Errc::SchemaError, fmt::format("{}:{}: bad number '{}'", path.string(), table.line_numbers[i], s));
    }
    m.build = v.build;
    m.rows.push_back(std::move(v));
  }
  return m;
}

}  // namespace tcp
