#include "tcp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json_io.hpp"
#include "tcp/git.hpp"
#include "tcp/process.hpp"
#include "tcp/random.hpp"

namespace tcp {
namespace {

using detail::json;

// ---------------------------------------------------------------------------
// Generated sources

struct Method {
  int params = 0;
  std::vector<std::string> body;
};

struct SutFile {
  int index = 0;
  int package = 0;
  std::vector<int> deps;
  std::vector<Method> methods;
};

struct TestFile {
  int index = 0;
  int package = 0;
  std::vector<int> coverage;
  int revision = 0;
  bool active = false;
};

std::string sut_path(int i, int pkg) { return fmt::format("src/main/java/p{}/C{}.java", pkg, i); }
std::string test_path(int j, int pkg) { return fmt::format("src/test/java/p{}/T{}Test.java", pkg, j); }

void statement(Rng& rng, int depth, const std::string& indent, std::vector<std::string>& out) {
  const int n = 1 + static_cast<int>(uniform_index(rng, 9));
  const int kind = static_cast<int>(uniform_index(rng, depth >= 2 ? 3 : 9));
  auto nested = [&](const std::string& in) {
    if (uniform_real(rng) < 0.4) statement(rng, depth + 1, in, out);
  };
  switch (kind) {
    case 0: out.push_back(fmt::format("{}v += {};", indent, n)); break;
    case 1: out.push_back(fmt::format("{}state = state + v;", indent)); break;
    case 2: out.push_back(fmt::format("{}v = v > {} ? v - 1 : v + 1;", indent, n)); break;
    case 3:
      out.push_back(fmt::format("{}if (v > {}) {{", indent, n));
      out.push_back(fmt::format("{}  v -= {};", indent, n));
      nested(indent + "  ");
      if (uniform_real(rng) < 0.3) {
        out.push_back(fmt::format("{}}} else {{", indent));
        out.push_back(fmt::format("{}  v += {};", indent, n + 1));
      }
      out.push_back(indent + "}");
      break;
    case 4:
      out.push_back(fmt::format("{}for (int i = 0; i < {}; i++) {{", indent, n));
      out.push_back(fmt::format("{}  v += i;", indent));
      nested(indent + "  ");
      out.push_back(indent + "}");
      break;
    case 5:
      out.push_back(fmt::format("{}while (v > {}) {{", indent, n * 10));
      out.push_back(fmt::format("{}  v /= 2;", indent));
      out.push_back(indent + "}");
      break;
    case 6:
      out.push_back(fmt::format("{}switch (v % 3) {{", indent));
      out.push_back(fmt::format("{}  case 0:", indent));
      out.push_back(fmt::format("{}    v++;", indent));
      out.push_back(fmt::format("{}    break;", indent));
      out.push_back(fmt::format("{}  case 1:", indent));
      out.push_back(fmt::format("{}    v += {};", indent, n));
      out.push_back(fmt::format("{}    break;", indent));
      out.push_back(fmt::format("{}  default:", indent));
      out.push_back(fmt::format("{}    v--;", indent));
      out.push_back(indent + "}");
      break;
    case 7:
      out.push_back(fmt::format("{}if (v > 0 && v < {}) {{", indent, n * 5));
      out.push_back(fmt::format("{}  v *= 2;", indent));
      nested(indent + "  ");
      out.push_back(indent + "}");
      break;
    default:
      out.push_back(fmt::format("{}// adjust by {}", indent, n));
      out.push_back(fmt::format("{}v = Math.max(v, {});", indent, n));
      break;
  }
}

Method make_method(Rng& rng) {
  Method m;
  m.params = static_cast<int>(uniform_index(rng, 5));
  m.body.push_back(m.params > 0 ? "int v = a0;" : "int v = state;");
  const int count = 2 + static_cast<int>(uniform_index(rng, 7));
  for (int i = 0; i < count; ++i) statement(rng, 0, "", m.body);
  m.body.push_back("return v;");
  return m;
}

std::string render_sut(const SutFile& f, int packages) {
  std::string s = fmt::format("package p{};\n\n", f.package);
  for (int d : f.deps) s += fmt::format("import p{}.C{};\n", d % packages, d);
  if (!f.deps.empty()) s += "\n";
  s += fmt::format("/**\n * Component C{}.\n */\npublic class C{} {{\n", f.index, f.index);
  s += "  private int state;\n";
  s += fmt::format("  private static final int LIMIT = {};\n", 3 + f.index % 7);
  for (std::size_t k = 0; k < f.methods.size(); ++k) {
    const auto& m = f.methods[k];
    std::string params;
    for (int p = 0; p < m.params; ++p) params += fmt::format("{}int a{}", p ? ", " : "", p);
    s += fmt::format("\n  public int m{}({}) {{\n", k, params);
    for (const auto& line : m.body) s += "    " + line + "\n";
    s += "  }\n";
  }
  for (std::size_t k = 0; k < f.deps.size(); ++k)
    s += fmt::format("\n  int use{}() {{\n    return new C{}().hashCode();\n  }}\n", k, f.deps[k]);
  s += "}\n";
  return s;
}

std::string render_test(const TestFile& t, int packages) {
  std::string s = fmt::format("package p{};\n\n", t.package);
  std::set<int> covered(t.coverage.begin(), t.coverage.end());
  for (int c : covered) s += fmt::format("import p{}.C{};\n", c % packages, c);
  s += fmt::format("\npublic class T{}Test {{\n", t.index);
  int k = 0;
  for (int c : covered) {
    s += fmt::format("\n  public void testC{}() {{\n", c);
    s += fmt::format("    C{} subject{} = new C{}();\n", c, k, c);
    s += fmt::format("    if (subject{} == null) {{\n      throw new IllegalStateException(\"missing\");\n    }}\n", k);
    for (int a = 0; a < 1 + (t.index + c) % 4; ++a) s += fmt::format("    check(subject{}.hashCode() >= {});\n", k, -a);
    s += "  }\n";
    ++k;
  }
  for (int r = 1; r <= t.revision; ++r) s += fmt::format("\n  public void regression{}() {{\n    check({} * 3 > 0);\n  }}\n", r, r);
  s += "\n  private static void check(boolean condition) {\n    if (!condition) {\n      throw new AssertionError();\n    }\n  }\n";
  s += "}\n";
  return s;
}

// ---------------------------------------------------------------------------
// History

struct PlannedCommit {
  std::string author;
  std::int64_t timestamp = 0;
  std::string message;
  std::map<std::string, std::string> writes;  // path -> content
};

struct PlannedBuild {
  std::int64_t id = 0;
  std::int64_t timestamp = 0;
  std::vector<std::size_t> commits;  // indices into the commit plan
  struct Exec {
    std::string job;
    std::string test;
    int verdict = 0;
    double duration = 0;
  };
  std::vector<Exec> records;
};

std::size_t weighted_pick(Rng& rng, const std::vector<double>& w, const std::vector<bool>& taken) {
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (!taken[i]) total += w[i];
  double x = uniform_real(rng) * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (taken[i]) continue;
    if (x < w[i]) return i;
    x -= w[i];
  }
  for (std::size_t i = w.size(); i-- > 0;)
    if (!taken[i]) return i;
  return 0;
}

int uniform_between(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(Errc::Io, fmt::format("cannot write {}", p.string()));
  out << text;
}

}  // namespace

void SynthConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw Error(Errc::InvalidConfig, fmt::format("synth: {} must be positive", name));
  };
  auto rate = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::InvalidConfig, fmt::format("synth: {} must be in [0, 1]", name));
  };
  positive(files, "files");
  positive(tests, "tests");
  positive(builds, "builds");
  positive(packages, "packages");
  positive(min_commits_per_build, "min_commits_per_build");
  positive(min_files_per_commit, "min_files_per_commit");
  positive(min_coverage, "min_coverage");
  if (max_commits_per_build < min_commits_per_build || max_files_per_commit < min_files_per_commit ||
      max_coverage < min_coverage)
    throw Error(Errc::InvalidConfig, "synth: a max bound is below its min bound");
  if (max_coverage > files || max_files_per_commit > files)
    throw Error(Errc::InvalidConfig, "synth: bounds exceed the number of files");
  if (flaky_count < 0 || flaky_count > tests) throw Error(Errc::InvalidConfig, "synth: flaky_count out of range");
  if (drift_period < 0) throw Error(Errc::InvalidConfig, "synth: drift_period must be non-negative");
  if (age_scale <= 0 || duration_log_sd < 0 || duration_noise_sd < 0)
    throw Error(Errc::InvalidConfig, "synth: scales must be positive");
  rate(test_cochange, "test_cochange");
  rate(failure_weight, "failure_weight");
  rate(base_failure_rate, "base_failure_rate");
  rate(flaky_failure_rate, "flaky_failure_rate");
  rate(late_test_fraction, "late_test_fraction");
  rate(second_job_probability, "second_job_probability");
  rate(fix_probability, "fix_probability");
}

#define TCP_SYNTH_FIELDS(X)                                                                                   \
  X(files) X(tests) X(builds) X(packages) X(min_commits_per_build) X(max_commits_per_build)                   \
  X(min_files_per_commit) X(max_files_per_commit) X(min_coverage) X(max_coverage) X(test_cochange)            \
  X(failure_weight) X(age_boost) X(age_scale) X(base_failure_rate) X(flaky_count) X(flaky_failure_rate)       \
  X(late_test_fraction) X(drift_period) X(drift_stride) X(duration_log_mean) X(duration_log_sd)               \
  X(duration_noise_sd) X(second_job_probability) X(fix_probability)

SynthConfig SynthConfig::from_json(std::string_view text) {
  SynthConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, fmt::format("synth config: {}", e.what()));
  }
  if (!j.is_object()) throw Error(Errc::InvalidConfig, "synth config must be a JSON object");
  std::set<std::string> known;
#define TCP_READ(name)                                                                        \
  known.insert(#name);                                                                        \
  if (j.contains(#name)) {                                                                    \
    try {                                                                                     \
      j.at(#name).get_to(c.name);                                                             \
    } catch (const json::exception&) {                                                        \
      throw Error(Errc::InvalidConfig, fmt::format("synth config: bad value for {}", #name)); \
    }                                                                                         \
  }
  TCP_SYNTH_FIELDS(TCP_READ)
#undef TCP_READ
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw Error(Errc::InvalidConfig, fmt::format("synth config: unknown key '{}'", key));
  c.validate();
  return c;
}

SynthConfig SynthConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidConfig, fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string SynthConfig::to_json() const {
  json j;
#define TCP_WRITE(name) j[#name] = name;
  TCP_SYNTH_FIELDS(TCP_WRITE)
#undef TCP_WRITE
  return j.dump(2);
}

std::string GroundTruth::to_json() const {
  json epochs = json::array();
  for (const auto& e : coverage_epochs) epochs.push_back({{"from_build", e.from_build}, {"coverage", e.coverage}});
  json faults = json::object();
  for (const auto& [b, tests] : fault_builds) faults[std::to_string(b)] = tests;
  json j = {{"coverage_epochs", epochs}, {"fault_builds", faults}, {"flaky_tests", flaky_tests}};
  return j.dump(2);
}

SynthResult generate_synthetic_history(const SynthConfig& cfg, std::uint64_t seed, const std::filesystem::path& out) {
  cfg.validate();
  if (std::filesystem::exists(out) && !std::filesystem::is_empty(out))
    throw Error(Errc::InvalidConfig, fmt::format("output directory {} is not empty", out.string()));
  Rng rng(mix_seed(seed, 0));

  // Repository contents.
  std::vector<SutFile> sut(cfg.files);
  std::vector<double> change_weight(cfg.files), fault_weight(cfg.files);
  for (int i = 0; i < cfg.files; ++i) {
    auto& f = sut[i];
    f.index = i;
    f.package = i % cfg.packages;
    const int deps = i == 0 ? 0 : static_cast<int>(uniform_index(rng, 3));
    std::set<int> chosen;
    for (int d = 0; d < deps; ++d) chosen.insert(static_cast<int>(uniform_index(rng, i)));
    f.deps.assign(chosen.begin(), chosen.end());
    const int methods = 1 + static_cast<int>(uniform_index(rng, 5));
    for (int k = 0; k < methods; ++k) f.methods.push_back(make_method(rng));
    change_weight[i] = std::exp(0.4 * standard_normal(rng));
    fault_weight[i] = std::clamp(std::exp(0.5 * standard_normal(rng)), 0.3, 3.0);
  }
  std::vector<TestFile> tests(cfg.tests);
  std::vector<double> base_duration(cfg.tests);
  std::vector<int> introduced(cfg.tests, 1);
  for (int j = 0; j < cfg.tests; ++j) {
    auto& t = tests[j];
    t.index = j;
    const int n = uniform_between(rng, cfg.min_coverage, cfg.max_coverage);
    for (auto idx : sample_indices(rng, static_cast<std::uint32_t>(cfg.files), static_cast<std::uint32_t>(n)))
      t.coverage.push_back(static_cast<int>(idx));
    t.package = t.coverage.front() % cfg.packages;
    base_duration[j] = std::exp(cfg.duration_log_mean + cfg.duration_log_sd * standard_normal(rng));
  }
  const int late = static_cast<int>(std::floor(cfg.late_test_fraction * cfg.tests));
  std::vector<std::uint32_t> order = sample_indices(rng, static_cast<std::uint32_t>(cfg.tests),
                                                    static_cast<std::uint32_t>(cfg.tests));
  for (int k = 0; k < late && cfg.builds >= 2; ++k)
    introduced[order[k]] = uniform_between(rng, 2, std::max(2, cfg.builds / 2));
  std::set<int> flaky;
  for (int k = late; k < cfg.tests && static_cast<int>(flaky.size()) < cfg.flaky_count; ++k) flaky.insert(order[k]);
  if (static_cast<int>(flaky.size()) < cfg.flaky_count)
    for (int k = 0; k < cfg.tests && static_cast<int>(flaky.size()) < cfg.flaky_count; ++k) flaky.insert(order[k]);

  GroundTruth truth;
  for (int j : flaky) truth.flaky_tests.push_back(test_path(j, tests[j].package));
  std::sort(truth.flaky_tests.begin(), truth.flaky_tests.end());
  auto record_epoch = [&](std::int64_t from) {
    GroundTruth::Epoch e;
    e.from_build = from;
    for (const auto& t : tests) {
      auto& files = e.coverage[test_path(t.index, t.package)];
      for (int c : t.coverage) files.push_back(sut_path(c, sut[c].package));
      std::sort(files.begin(), files.end());
    }
    truth.coverage_epochs.push_back(std::move(e));
  };
  record_epoch(1);

  const std::vector<std::string> authors = {"alice", "bob", "carol", "dave", "erin", "frank"};
  const std::vector<double> author_weight = {0.35, 0.25, 0.15, 0.1, 0.1, 0.05};
  auto pick_author = [&] {
    std::vector<bool> none(authors.size(), false);
    return authors[weighted_pick(rng, author_weight, none)];
  };
  const std::int64_t t0 = 1600000000;
  std::vector<PlannedCommit> commits;
  auto test_write = [&](const TestFile& t, PlannedCommit& c) {
    c.writes[test_path(t.index, t.package)] = render_test(t, cfg.packages);
  };
  auto sut_write = [&](const SutFile& f, PlannedCommit& c) {
    c.writes[sut_path(f.index, f.package)] = render_sut(f, cfg.packages);
  };
  auto modify = [&](SutFile& f) {
    if (f.methods.size() < 8 && uniform_real(rng) < 0.25) {
      f.methods.push_back(make_method(rng));
    } else {
      f.methods[uniform_index(rng, f.methods.size())] = make_method(rng);
    }
  };

  {
    PlannedCommit initial{"alice", t0, "Initial import", {}};
    for (const auto& f : sut) sut_write(f, initial);
    for (auto& t : tests)
      if (introduced[t.index] == 1) {
        t.active = true;
        test_write(t, initial);
      }
    commits.push_back(std::move(initial));
  }

  std::vector<PlannedBuild> builds;
  std::vector<int> pending_fixes;
  Rng exec_rng(mix_seed(seed, 1));
  for (int b = 1; b <= cfg.builds; ++b) {
    PlannedBuild build;
    build.id = b;
    build.timestamp = t0 + 7200LL * b;
    std::int64_t clock = build.timestamp - 3600;
    std::set<int> changed_sut;
    auto open_commit = [&](std::string message) {
      commits.push_back({pick_author(), clock, std::move(message), {}});
      clock += 60;
      build.commits.push_back(commits.size() - 1);
      return &commits.back();
    };
    auto edit_sut = [&](int i, PlannedCommit* c, bool risky) {
      modify(sut[i]);
      sut_write(sut[i], *c);
      if (risky) changed_sut.insert(i);
      for (auto& t : tests)
        if (t.active && std::find(t.coverage.begin(), t.coverage.end(), i) != t.coverage.end() &&
            uniform_real(rng) < cfg.test_cochange) {
          ++t.revision;
          test_write(t, *c);
        }
    };

    if (cfg.drift_period > 0 && b > 1 && (b - 1) % cfg.drift_period == 0) {
      auto* c = open_commit("Rework test fixtures");
      for (auto& t : tests) {
        for (int& cov : t.coverage) cov = (cov + cfg.drift_stride) % cfg.files;
        if (t.active) test_write(t, *c);
      }
      record_epoch(b);
    }
    for (int i : pending_fixes) {
      auto* c = open_commit(fmt::format("Fix bug in C{}", i));
      edit_sut(i, c, false);  // fixes repair rather than break
    }
    pending_fixes.clear();
    const int n_commits = uniform_between(rng, cfg.min_commits_per_build, cfg.max_commits_per_build);
    static const char* kMessages[] = {"Add feature to C{}", "Refactor C{}", "Update C{}",
                                      "Improve performance of C{}", "Clean up C{}"};
    for (int k = 0; k < n_commits; ++k) {
      const int n_files = uniform_between(rng, cfg.min_files_per_commit, cfg.max_files_per_commit);
      std::vector<bool> taken(cfg.files, false);
      std::vector<int> picked;
      for (int f = 0; f < n_files; ++f) {
        auto i = weighted_pick(rng, change_weight, taken);
        taken[i] = true;
        picked.push_back(static_cast<int>(i));
      }
      std::string message = uniform_real(rng) < 0.05 ? fmt::format("Fix typo in C{} docs", picked.front())
                                                     : fmt::format(fmt::runtime(kMessages[uniform_index(rng, 5)]),
                                                                   picked.front());
      auto* c = open_commit(std::move(message));
      for (int i : picked) edit_sut(i, c, true);
    }
    for (auto& t : tests)
      if (!t.active && introduced[t.index] == b) {
        auto* c = open_commit(fmt::format("Add T{}Test", t.index));
        t.active = true;
        test_write(t, *c);
      }

    // Verdicts.
    std::vector<std::string> caused;
    std::set<int> fix_targets;
    for (auto& t : tests) {
      if (!t.active) continue;
      const auto path = test_path(t.index, t.package);
      bool failed;
      if (flaky.contains(t.index)) {
        failed = uniform_real(exec_rng) < cfg.flaky_failure_rate;
      } else {
        const double age = b - introduced[t.index];
        const double boost = 1.0 + cfg.age_boost * std::exp(-age / cfg.age_scale);
        double survive = 1.0;
        std::vector<int> hits;
        for (int c : t.coverage)
          if (changed_sut.contains(c)) {
            survive *= 1.0 - std::min(1.0, cfg.failure_weight * fault_weight[c] * boost);
            hits.push_back(c);
          }
        const bool by_change = uniform_real(exec_rng) >= survive;
        const bool by_chance = uniform_real(exec_rng) < cfg.base_failure_rate;
        failed = by_change || by_chance;
        if (by_change) {
          caused.push_back(path);
          fix_targets.insert(hits[uniform_index(exec_rng, hits.size())]);
        }
      }
      int verdict = 0;
      if (failed) {
        const double u = uniform_real(exec_rng);
        verdict = u < 0.7 ? 1 : (u < 0.95 ? 2 : 3);
      }
      double duration = base_duration[t.index] * std::exp(cfg.duration_noise_sd * standard_normal(exec_rng));
      if (failed) duration *= 0.6;
      build.records.push_back({"j1", path, verdict, std::round(duration)});
    }
    if (uniform_real(exec_rng) < cfg.second_job_probability) {
      for (const auto& rec : std::vector<PlannedBuild::Exec>(build.records))
        if (uniform_real(exec_rng) < 0.5) {
          auto copy = rec;
          copy.job = "j2";
          copy.verdict = uniform_real(exec_rng) < 0.02 ? 1 : 0;
          build.records.push_back(copy);
        }
    }
    if (!caused.empty()) {
      std::sort(caused.begin(), caused.end());
      truth.fault_builds[b] = caused;
    }
    for (int i : fix_targets)
      if (pending_fixes.size() < 2 && uniform_real(rng) < cfg.fix_probability) pending_fixes.push_back(i);
    builds.push_back(std::move(build));
  }

  // Materialise the repository with fast-import.
  std::filesystem::create_directories(out);
  const auto repo_dir = out / "repo";
  auto git = [&](std::vector<std::string> args, const std::optional<std::string>& input = std::nullopt) {
    args.insert(args.begin(), "git");
    auto r = run_process(args, input);
    if (r.exit_code != 0) throw Error(Errc::Io, fmt::format("{} failed: {}", args[1], r.err));
    return r;
  };
  git({"init", "-q", repo_dir.string()});
  git({"-C", repo_dir.string(), "symbolic-ref", "HEAD", "refs/heads/main"});
  std::string stream;
  int mark = 0;
  std::vector<int> commit_marks;
  for (std::size_t ci = 0; ci < commits.size(); ++ci) {
    const auto& c = commits[ci];
    std::vector<std::pair<std::string, int>> blobs;
    for (const auto& [path, content] : c.writes) {
      stream += fmt::format("blob\nmark :{}\ndata {}\n{}\n", ++mark, content.size(), content);
      blobs.emplace_back(path, mark);
    }
    commit_marks.push_back(++mark);
    stream += fmt::format("commit refs/heads/main\nmark :{}\n", mark);
    stream += fmt::format("author {0} <{0}@example.com> {1} +0000\ncommitter {0} <{0}@example.com> {1} +0000\n",
                          c.author, c.timestamp);
    stream += fmt::format("data {}\n{}\n", c.message.size() + 1, c.message + "\n");
    if (ci > 0) stream += fmt::format("from :{}\n", commit_marks[ci - 1]);
    for (const auto& [path, m] : blobs) stream += fmt::format("M 100644 :{} {}\n", m, path);
    stream += "\n";
  }
  const auto marks_file = out / ".marks";
  git({"-C", repo_dir.string(), "fast-import", "--quiet", "--export-marks=" + std::filesystem::absolute(marks_file).string()},
      stream);
  std::map<int, std::string> sha_of_mark;
  {
    std::ifstream in(marks_file);
    std::string m, sha;
    while (in >> m >> sha) sha_of_mark[std::stoi(m.substr(1))] = sha;
  }
  std::filesystem::remove(marks_file);
  git({"-C", repo_dir.string(), "checkout", "-q", "-f", "main"});

  BuildHistory history;
  std::ostringstream exec_csv;
  exec_csv << "build_id,job_id,test_path,verdict,duration_ms\n";
  for (const auto& pb : builds) {
    Build b;
    b.id = BuildId{pb.id};
    b.change_set.build = b.id;
    b.wall_clock = pb.timestamp;
    for (auto ci : pb.commits) b.change_set.commits.push_back(sha_of_mark.at(commit_marks[ci]));
    history.builds.push_back(std::move(b));
    for (const auto& r : pb.records)
      exec_csv << fmt::format("{},{},{},{},{}\n", pb.id, r.job, r.test, r.verdict, r.duration);
  }
  SynthResult result{DatasetLayout{out, std::filesystem::absolute(repo_dir)}, std::move(truth)};
  write_history(result.layout, history);  // builds.csv; exec_records.csv is replaced below with all jobs
  write_file(result.layout.exec_records_csv(), exec_csv.str());
  write_dataset_json(result.layout);
  write_commits_jsonl(result.layout.commits_jsonl(), GitRepo(repo_dir).log("HEAD"));
  write_file(out / "ground_truth.json", result.truth.to_json() + "\n");
  return result;
}

}  // namespace tcp
