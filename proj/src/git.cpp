#include "tcp/git.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <string_view>
#include <unordered_map>

#include <fmt/format.h>

#include "tcp/log.hpp"
#include "tcp/process.hpp"

namespace tcp {
namespace {

constexpr std::string_view kNullBlob = "0000000000000000000000000000000000000000";

std::string trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == '\n' || s.front() == ' ')) s.remove_prefix(1);
  return std::string(s);
}

// git's C-style quoting of unusual paths.
std::string unquote(std::string_view s) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') return std::string(s);
  s = s.substr(1, s.size() - 2);
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 >= s.size()) {
      out += s[i];
      continue;
    }
    const char c = s[++i];
    switch (c) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'a': out += '\a'; break;
      case 'b': out += '\b'; break;
      case 'f': out += '\f'; break;
      case 'r': out += '\r'; break;
      case 'v': out += '\v'; break;
      default:
        if (c >= '0' && c <= '7' && i + 2 < s.size()) {
          out += static_cast<char>(((c - '0') << 6) | ((s[i + 1] - '0') << 3) | (s[i + 2] - '0'));
          i += 2;
        } else {
          out += c;
        }
    }
  }
  return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

bool parse_int(std::string_view s, int& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

// "-a[,b]" or "+c[,d]"
bool parse_range(std::string_view s, HunkRange& r) {
  if (s.size() < 2) return false;
  s.remove_prefix(1);
  auto comma = s.find(',');
  if (comma == std::string_view::npos) {
    r.count = 1;
    return parse_int(s, r.start);
  }
  return parse_int(s.substr(0, comma), r.start) && parse_int(s.substr(comma + 1), r.count);
}

struct PendingFile {
  FileChange change;
  std::string old_blob;
  std::string new_blob;
  std::vector<HunkRange> deleted;
  std::vector<HunkRange> added;
  bool broken = false;
};

struct PendingCommit {
  Commit commit;
  std::vector<PendingFile> files;
};

PendingCommit parse_record(std::string_view record) {
  PendingCommit pc;
  std::vector<std::string_view> head;
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) {
    auto end = record.find('\x02', pos);
    if (end == std::string_view::npos) throw Error(Errc::Io, "unexpected git log output");
    head.push_back(record.substr(pos, end - pos));
    pos = end + 1;
  }
  pc.commit.id = std::string(head[0]);
  std::int64_t ts = 0;
  std::from_chars(head[1].data(), head[1].data() + head[1].size(), ts);
  pc.commit.timestamp = ts;
  pc.commit.author = std::string(head[2]);
  std::string_view msg = head[3];
  while (!msg.empty() && msg.back() == '\n') msg.remove_suffix(1);
  pc.commit.message = std::string(msg);

  PendingFile* current = nullptr;
  std::size_t patch_index = 0;
  for (auto line : split(record.substr(pos), '\n')) {
    if (line.starts_with(":")) {
      auto tab = line.find('\t');
      if (tab == std::string_view::npos) continue;
      auto meta = split(line.substr(1, tab - 1), ' ');
      PendingFile f;
      f.change.path = unquote(line.substr(tab + 1));
      if (meta.size() >= 4) {
        f.old_blob = std::string(meta[2]);
        f.new_blob = std::string(meta[3]);
      }
      pc.files.push_back(std::move(f));
    } else if (line.starts_with("diff --git ")) {
      current = nullptr;
      // Patches follow the raw entries in the same order; verify the path.
      for (std::size_t k = patch_index; k < pc.files.size(); ++k) {
        const auto& p = pc.files[k].change.path;
        if (line.ends_with(" b/" + p) || line.ends_with("\"b/" + p + "\"") || line.find(p) != std::string_view::npos) {
          current = &pc.files[k];
          patch_index = k + 1;
          break;
        }
      }
      if (!current) warn(fmt::format("commit {}: unmatched diff header '{}'", pc.commit.id, line));
    } else if (line.starts_with("@@ ") && current && !current->broken) {
      auto parts = split(line, ' ');
      HunkRange del, add;
      if (parts.size() < 4 || !parse_range(parts[1], del) || !parse_range(parts[2], add) ||
          del.count < 0 || add.count < 0) {
        warn(fmt::format("commit {}: cannot parse hunk header in {}; file skipped", pc.commit.id,
                         current->change.path));
        current->broken = true;
        continue;
      }
      if (del.count > 0) {
        current->deleted.push_back(del);
        current->change.deleted_chunks.push_back(del.start);
        current->change.lines_deleted += del.count;
      }
      if (add.count > 0) {
        current->added.push_back(add);
        current->change.added_chunks.push_back(add.start);
        current->change.lines_added += add.count;
      }
    }
  }
  return pc;
}

}  // namespace

GitRepo::GitRepo(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::is_directory(path_))
    throw Error(Errc::RepoNotFound, fmt::format("repository not found: {}", path_.string()));
  auto r = run_process(git_args({"rev-parse", "--git-dir"}));
  if (r.exit_code != 0)
    throw Error(Errc::RepoNotFound, fmt::format("not a git repository: {}", path_.string()));
}

std::vector<std::string> GitRepo::git_args(std::initializer_list<std::string> args) const {
  std::vector<std::string> argv = {"git", "-C", path_.string(), "-c", "core.quotepath=off"};
  argv.insert(argv.end(), args.begin(), args.end());
  return argv;
}

bool GitRepo::empty() const {
  auto r = run_process(git_args({"rev-list", "-n", "1", "--all"}));
  return r.exit_code != 0 || trim(r.out).empty();
}

std::optional<std::string> GitRepo::resolve(const std::string& ref) const {
  auto r = run_process(git_args({"rev-parse", "--verify", "--quiet", ref + "^{commit}"}));
  if (r.exit_code != 0) return std::nullopt;
  auto sha = trim(r.out);
  if (sha.empty()) return std::nullopt;
  return sha;
}

std::vector<Commit> GitRepo::log(const std::string& until, const AnalyzerOptions& options,
                                 const RiskThresholds& thresholds) const {
  if (empty()) return {};
  auto sha = resolve(until);
  if (!sha) throw Error(Errc::UnresolvableRef, fmt::format("cannot resolve '{}'", until));
  auto r = run_process(git_args({"log", "--reverse", "--date-order", "--diff-merges=first-parent",
                                 "--no-renames", "-p", "-U0", "--raw", "--no-abbrev", "--no-color",
                                 "--no-ext-diff", "--format=%x01%H%x02%at%x02%an%x02%B%x02", *sha}));
  if (r.exit_code != 0) throw Error(Errc::Io, fmt::format("git log failed: {}", trim(r.err)));

  std::vector<PendingCommit> pending;
  for (auto record : split(r.out, '\x01'))
    if (!record.empty()) pending.push_back(parse_record(record));

  // Unit spans of every blob touched by an analyzable file change.
  std::set<std::string> wanted;
  for (const auto& pc : pending)
    for (const auto& f : pc.files)
      if (!f.broken && options.accepts(f.change.path))
        for (const auto* b : {&f.old_blob, &f.new_blob})
          if (!b->empty() && *b != kNullBlob) wanted.insert(*b);
  std::unordered_map<std::string, std::vector<UnitSpan>> units;
  std::vector<std::string> batch;
  auto flush = [&] {
    for (auto& [id, text] : read_blobs(batch)) units[id] = analyze_source(text).units;
    batch.clear();
  };
  for (const auto& id : wanted) {
    batch.push_back(id);
    if (batch.size() == 512) flush();
  }
  if (!batch.empty()) flush();

  static const std::vector<UnitSpan> none;
  auto spans = [&](const std::string& blob) -> const std::vector<UnitSpan>& {
    auto it = units.find(blob);
    return it == units.end() ? none : it->second;
  };

  std::vector<Commit> out;
  out.reserve(pending.size());
  for (auto& pc : pending) {
    for (auto& f : pc.files) {
      if (f.broken) continue;
      if (options.accepts(f.change.path))
        f.change.unit_changes =
            unit_changes(spans(f.old_blob), spans(f.new_blob), f.deleted, f.added, thresholds);
      pc.commit.file_changes.push_back(std::move(f.change));
    }
    out.push_back(std::move(pc.commit));
  }
  return out;
}

std::vector<TreeEntry> GitRepo::tree(const std::string& commit) const {
  auto r = run_process(git_args({"ls-tree", "-r", "-z", "--full-tree", commit}));
  if (r.exit_code != 0) throw Error(Errc::UnresolvableRef, fmt::format("cannot list tree of {}", commit));
  std::vector<TreeEntry> out;
  for (auto entry : split(r.out, '\0')) {
    auto tab = entry.find('\t');
    if (tab == std::string_view::npos) continue;
    auto meta = split(entry.substr(0, tab), ' ');
    if (meta.size() < 3 || meta[1] != "blob") continue;
    out.push_back({std::string(entry.substr(tab + 1)), std::string(meta[2])});
  }
  return out;
}

std::map<std::string, std::string> GitRepo::read_blobs(const std::vector<std::string>& ids) const {
  std::map<std::string, std::string> out;
  if (ids.empty()) return out;
  std::string input;
  for (const auto& id : ids) input += id + "\n";
  auto r = run_process(git_args({"cat-file", "--batch"}), input);
  if (r.exit_code != 0) throw Error(Errc::Io, fmt::format("git cat-file failed: {}", trim(r.err)));
  std::string_view s = r.out;
  while (!s.empty()) {
    auto eol = s.find('\n');
    if (eol == std::string_view::npos) break;
    auto header = split(s.substr(0, eol), ' ');
    s.remove_prefix(eol + 1);
    if (header.size() < 3) continue;  // "<id> missing"
    std::size_t size = 0;
    std::from_chars(header[2].data(), header[2].data() + header[2].size(), size);
    if (size > s.size()) throw Error(Errc::Io, "truncated git cat-file output");
    if (header[1] == "blob") out.emplace(std::string(header[0]), std::string(s.substr(0, size)));
    s.remove_prefix(std::min(s.size(), size + 1));
  }
  return out;
}

std::vector<Commit> ingest_git_history(const std::filesystem::path& repo_path, const std::string& until) {
  return GitRepo(repo_path).log(until);
}

}  // namespace tcp
