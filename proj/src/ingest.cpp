#include "tcp/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json_io.hpp"
#include "tcp/csv.hpp"
#include "tcp/git.hpp"

namespace tcp {
namespace {

using detail::json;

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

[[noreturn]] void schema_error(const std::filesystem::path& file, std::size_t line, const std::string& what) {
  throw Error(Errc::SchemaError, fmt::format("{}:{}: {}", file.filename().string(), line, what));
}

bool is_hex40(std::string_view s) {
  return s.size() == 40 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::SchemaError, fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, fmt::format("cannot write {}", path.string()));
  return out;
}

}  // namespace

DatasetLayout DatasetLayout::open(const std::filesystem::path& root) {
  DatasetLayout layout{root, std::nullopt};
  if (!std::filesystem::is_directory(root))
    throw Error(Errc::SchemaError, fmt::format("dataset directory not found: {}", root.string()));
  if (std::filesystem::exists(layout.dataset_json())) {
    json j;
    try {
      j = json::parse(read_text(layout.dataset_json()));
    } catch (const json::exception& e) {
      throw Error(Errc::SchemaError, fmt::format("dataset.json: {}", e.what()));
    }
    if (j.contains("repo") && j["repo"].is_string()) {
      std::filesystem::path repo = j["repo"].get<std::string>();
      layout.repo = std::filesystem::absolute(repo.is_absolute() ? repo : root / repo);
    }
  } else if (std::filesystem::is_directory(root / "repo")) {
    layout.repo = std::filesystem::absolute(root / "repo");
  }
  return layout;
}

std::int64_t parse_iso8601(std::string_view text) {
  auto bad = [&] { return Error(Errc::SchemaError, fmt::format("bad timestamp '{}'", text)); };
  if (text.size() < 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':')
    throw bad();
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (!parse_number(text.substr(0, 4), y) || !parse_number(text.substr(5, 2), mo) ||
      !parse_number(text.substr(8, 2), d) || !parse_number(text.substr(11, 2), h) ||
      !parse_number(text.substr(14, 2), mi) || !parse_number(text.substr(17, 2), s))
    throw bad();
  using namespace std::chrono;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) throw bad();
  std::string_view rest = text.substr(19);
  if (!rest.empty() && rest.front() == '.') {
    rest.remove_prefix(1);
    while (!rest.empty() && rest.front() >= '0' && rest.front() <= '9') rest.remove_prefix(1);
  }
  std::int64_t offset = 0;
  if (rest == "Z" || rest.empty()) {
  } else if (rest.size() == 6 && (rest[0] == '+' || rest[0] == '-') && rest[3] == ':') {
    int oh = 0, om = 0;
    if (!parse_number(rest.substr(1, 2), oh) || !parse_number(rest.substr(4, 2), om)) throw bad();
    offset = (rest[0] == '+' ? 1 : -1) * (oh * 3600 + om * 60);
  } else {
    throw bad();
  }
  auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + s - offset;
}

std::string format_iso8601(std::int64_t seconds) {
  using namespace std::chrono;
  auto tp = sys_seconds{std::chrono::seconds{seconds}};
  auto dp = floor<days>(tp);
  year_month_day ymd{dp};
  hh_mm_ss hms{tp - dp};
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                     hms.hours().count(), hms.minutes().count(), hms.seconds().count());
}

std::string select_primary_job(const JobRecords& jobs) {
  if (jobs.empty()) throw Error(Errc::EmptyBuild, "build has no jobs");
  const std::string* best = nullptr;
  std::size_t best_count = 0;
  for (const auto& [job, records] : jobs) {  // map order: ties keep the smallest id
    std::set<TestId> tests;
    for (const auto& r : records) tests.insert(r.test);
    if (!best || tests.size() > best_count) {
      best = &job;
      best_count = tests.size();
    }
  }
  return *best;
}

BuildHistory ingest_exec_records(const DatasetLayout& layout) {
  BuildHistory history;
  const auto builds_path = layout.builds_csv();
  if (!std::filesystem::exists(builds_path))
    throw Error(Errc::SchemaError, fmt::format("missing {}", builds_path.string()));
  auto builds = csv::read_file(builds_path);
  const auto c_id = builds.require("build_id", "builds.csv");
  const auto c_ts = builds.require("timestamp_iso8601", "builds.csv");
  const auto c_commits = builds.require("commits", "builds.csv");
  std::set<std::int64_t> seen;
  for (std::size_t i = 0; i < builds.rows.size(); ++i) {
    const auto& row = builds.rows[i];
    const auto line = builds.line_numbers[i];
    if (row.size() != builds.header.size()) schema_error(builds_path, line, "wrong number of fields");
    Build b;
    if (!parse_number(row[c_id], b.id.ordinal) || b.id.ordinal <= 0)
      schema_error(builds_path, line, fmt::format("build_id '{}' is not a positive integer", row[c_id]));
    if (!seen.insert(b.id.ordinal).second)
      schema_error(builds_path, line, fmt::format("build_id {} repeated", b.id.ordinal));
    if (!row[c_ts].empty()) {
      try {
        b.wall_clock = parse_iso8601(row[c_ts]);
      } catch (const Error& e) {
        schema_error(builds_path, line, e.what());
      }
    }
    b.change_set.build = b.id;
    std::string_view list = row[c_commits];
    while (!list.empty()) {
      auto semi = list.find(';');
      auto hash = list.substr(0, semi);
      if (!is_hex40(hash)) schema_error(builds_path, line, fmt::format("bad commit hash '{}'", hash));
      b.change_set.commits.emplace_back(hash);
      list = semi == std::string_view::npos ? std::string_view{} : list.substr(semi + 1);
    }
    history.builds.push_back(std::move(b));
  }
  std::sort(history.builds.begin(), history.builds.end(),
            [](const Build& a, const Build& b) { return a.id < b.id; });

  const auto exec_path = layout.exec_records_csv();
  if (!std::filesystem::exists(exec_path))
    throw Error(Errc::SchemaError, fmt::format("missing {}", exec_path.string()));
  auto exec = csv::read_file(exec_path);
  const auto e_build = exec.require("build_id", "exec_records.csv");
  const auto e_job = exec.require("job_id", "exec_records.csv");
  const auto e_test = exec.require("test_path", "exec_records.csv");
  const auto e_verdict = exec.require("verdict", "exec_records.csv");
  const auto e_dur = exec.require("duration_ms", "exec_records.csv");
  std::map<std::int64_t, JobRecords> jobs;
  std::set<std::tuple<std::int64_t, std::string, std::string>> keys;
  for (std::size_t i = 0; i < exec.rows.size(); ++i) {
    const auto& row = exec.rows[i];
    const auto line = exec.line_numbers[i];
    if (row.size() != exec.header.size()) schema_error(exec_path, line, "wrong number of fields");
    ExecutionRecord r;
    if (!parse_number(row[e_build], r.build.ordinal) || !seen.contains(r.build.ordinal))
      schema_error(exec_path, line, fmt::format("unknown build_id '{}'", row[e_build]));
    if (row[e_test].empty()) schema_error(exec_path, line, "empty test_path");
    r.test = TestId(row[e_test]);
    int code = -1;
    if (!parse_number(row[e_verdict], code) || code < 0 || code > 3)
      schema_error(exec_path, line, fmt::format("verdict '{}' not in 0..3", row[e_verdict]));
    r.verdict = verdict_from_code(code);
    if (!parse_number(row[e_dur], r.duration_ms) || !(r.duration_ms >= 0.0))
      schema_error(exec_path, line, fmt::format("bad duration_ms '{}'", row[e_dur]));
    if (!keys.emplace(r.build.ordinal, row[e_job], row[e_test]).second)
      throw Error(Errc::DuplicateRecord,
                  fmt::format("exec_records.csv:{}: build {} job {} test {} repeated", line,
                              r.build.ordinal, row[e_job], row[e_test]));
    jobs[r.build.ordinal][row[e_job]].push_back(std::move(r));
  }
  for (auto& b : history.builds) {
    auto it = jobs.find(b.id.ordinal);
    if (it == jobs.end()) continue;
    auto& records = it->second[select_primary_job(it->second)];
    std::sort(records.begin(), records.end(),
              [](const ExecutionRecord& a, const ExecutionRecord& c) { return a.test < c.test; });
    b.records = std::move(records);
  }
  return history;
}

std::vector<Commit> read_commits_jsonl(const std::filesystem::path& path) {
  std::vector<Commit> out;
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      Commit c;
      c.id = j.at("hash").get<std::string>();
      const auto& ts = j.at("timestamp");
      c.timestamp = ts.is_string() ? parse_iso8601(ts.get<std::string>()) : ts.get<std::int64_t>();
      c.author = j.value("author", "");
      c.message = j.value("message", "");
      for (const auto& f : j.at("files")) {
        FileChange fc;
        fc.path = f.at("path").get<std::string>();
        fc.lines_added = f.at("added").get<int>();
        fc.lines_deleted = f.at("deleted").get<int>();
        fc.added_chunks = f.value("added_chunks", std::vector<int>{});
        fc.deleted_chunks = f.value("deleted_chunks", std::vector<int>{});
        if (fc.lines_added < 0 || fc.lines_deleted < 0)
          schema_error(path, number, "negative line count");
        for (int s : fc.added_chunks)
          if (s < 1) schema_error(path, number, "chunk start line < 1");
        for (int s : fc.deleted_chunks)
          if (s < 1) schema_error(path, number, "chunk start line < 1");
        if (f.contains("unit_risk")) {
          for (const auto& u : f["unit_risk"]) {
            UnitChange uc;
            const auto& low = u.at("low");
            for (int p = 0; p < kDmmProperties; ++p) uc.low_risk[p] = low.at(p).get<bool>();
            uc.added = u.at("added").get<int>();
            uc.deleted = u.at("deleted").get<int>();
            fc.unit_changes.push_back(uc);
          }
        }
        c.file_changes.push_back(std::move(fc));
      }
      out.push_back(std::move(c));
    } catch (const json::exception& e) {
      schema_error(path, number, e.what());
    }
  }
  return out;
}

void write_commits_jsonl(const std::filesystem::path& path, const std::vector<Commit>& commits) {
  auto out = open_out(path);
  for (const auto& c : commits) {
    json files = json::array();
    for (const auto& f : c.file_changes) {
      json jf = {{"path", f.path},
                 {"added", f.lines_added},
                 {"deleted", f.lines_deleted},
                 {"added_chunks", f.added_chunks},
                 {"deleted_chunks", f.deleted_chunks}};
      if (!f.unit_changes.empty()) {
        json units = json::array();
        for (const auto& u : f.unit_changes)
          units.push_back({{"low", {u.low_risk[0], u.low_risk[1], u.low_risk[2]}},
                           {"added", u.added},
                           {"deleted", u.deleted}});
        jf["unit_risk"] = std::move(units);
      }
      files.push_back(std::move(jf));
    }
    json j = {{"hash", c.id},
              {"timestamp", c.timestamp},
              {"author", c.author},
              {"message", c.message},
              {"files", std::move(files)}};
    out << j.dump() << '\n';
  }
}

void write_history(const DatasetLayout& layout, const BuildHistory& history) {
  std::filesystem::create_directories(layout.root);
  {
    auto out = open_out(layout.builds_csv());
    csv::write_row(out, {"build_id", "timestamp_iso8601", "commits"});
    for (const auto& b : history.builds) {
      std::string commits;
      for (const auto& c : b.change_set.commits) commits += (commits.empty() ? "" : ";") + c;
      csv::write_row(out, {std::to_string(b.id.ordinal),
                           b.wall_clock ? format_iso8601(*b.wall_clock) : std::string(), commits});
    }
  }
  auto out = open_out(layout.exec_records_csv());
  csv::write_row(out, {"build_id", "job_id", "test_path", "verdict", "duration_ms"});
  for (const auto& b : history.builds)
    for (const auto& r : b.records)
      csv::write_row(out, {std::to_string(b.id.ordinal), "primary", r.test.path(),
                           std::to_string(verdict_code(r.verdict)), fmt::format("{}", r.duration_ms)});
}

void write_dataset_json(const DatasetLayout& layout) {
  json j = json::object();
  if (layout.repo) {
    auto rel = std::filesystem::relative(*layout.repo, std::filesystem::absolute(layout.root));
    j["repo"] = rel.empty() ? layout.repo->string() : rel.generic_string();
  }
  open_out(layout.dataset_json()) << j.dump(2) << '\n';
}

const Commit& Dataset::commit(const CommitId& id) const {
  auto it = commit_index.find(id);
  if (it == commit_index.end()) throw Error(Errc::UnresolvableRef, fmt::format("unknown commit {}", id));
  return commits[it->second];
}

Dataset load_dataset(const std::filesystem::path& root, const LoadOptions& options) {
  Dataset ds;
  ds.layout = DatasetLayout::open(root);
  ds.history = ingest_exec_records(ds.layout);
  if (std::filesystem::exists(ds.layout.commits_jsonl())) {
    ds.commits = read_commits_jsonl(ds.layout.commits_jsonl());
  } else if (ds.layout.repo) {
    ds.commits = GitRepo(*ds.layout.repo).log("HEAD", options.analyzer, options.thresholds);
  } else {
    throw Error(Errc::SchemaError,
                fmt::format("{}: neither commits.jsonl nor a repository is available", root.string()));
  }
  for (std::size_t i = 0; i < ds.commits.size(); ++i) ds.commit_index.emplace(ds.commits[i].id, i);
  for (auto& b : ds.history.builds) {
    for (const auto& id : b.change_set.commits) {
      auto it = ds.commit_index.find(id);
      if (it == ds.commit_index.end())
        throw Error(Errc::SchemaError, fmt::format("build {} references unknown commit {}", b.id.ordinal, id));
      for (const auto& f : ds.commits[it->second].file_changes) b.change_set.changed_files.insert(f.path);
    }
  }
  check_invariants(ds.history);
  return ds;
}

}  // namespace tcp
