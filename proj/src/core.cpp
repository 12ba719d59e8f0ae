#include "tcp/core.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace tcp {

int exit_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::InsufficientHistory:
    case Errc::NoFailedBuilds:
      return 3;
    case Errc::Invariant:
      return 4;
    default:
      return 2;
  }
}

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::SchemaError: return "SchemaError";
    case Errc::DuplicateRecord: return "DuplicateRecordError";
    case Errc::RepoNotFound: return "RepoNotFound";
    case Errc::UnresolvableRef: return "UnresolvableRef";
    case Errc::EmptyBuild: return "EmptyBuildError";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::DegenerateCorpus: return "DegenerateCorpus";
    case Errc::UnknownTest: return "UnknownTest";
    case Errc::UnknownFeature: return "UnknownFeature";
    case Errc::CatalogMismatch: return "CatalogMismatch";
    case Errc::NoFailedBuilds: return "NoFailedBuilds";
    case Errc::NoFailures: return "NoFailures";
    case Errc::InsufficientHistory: return "InsufficientHistory";
    case Errc::Io: return "IoError";
    case Errc::Invariant: return "InvariantViolation";
  }
  return "Error";
}

TestId::TestId(std::string path) : path_(std::move(path)) {
  if (path_.empty()) throw Error(Errc::Invariant, "test id must be a non-empty path");
}

Verdict verdict_from_code(int code) {
  switch (code) {
    case 0: return Verdict::Passed;
    case 1: return Verdict::AssertionFailure;
    case 2: return Verdict::ExceptionFailure;
    case 3: return Verdict::UnknownFailure;
    default: throw Error(Errc::SchemaError, fmt::format("unknown verdict code {}", code));
  }
}

int verdict_code(Verdict v) noexcept {
  switch (v) {
    case Verdict::Passed: return 0;
    case Verdict::AssertionFailure: return 1;
    case Verdict::ExceptionFailure: return 2;
    case Verdict::UnknownFailure: return 3;
  }
  return 3;
}

bool Build::failed() const noexcept {
  return std::any_of(records.begin(), records.end(),
                     [](const ExecutionRecord& r) { return is_failed(r.verdict); });
}

std::vector<TestId> Build::tests() const {
  std::vector<TestId> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.test);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

const Build* BuildHistory::find(BuildId id) const noexcept {
  auto pos = position(id);
  return pos ? &builds[*pos] : nullptr;
}

std::optional<std::size_t> BuildHistory::position(BuildId id) const noexcept {
  auto it = std::lower_bound(builds.begin(), builds.end(), id,
                             [](const Build& b, BuildId v) { return b.id < v; });
  if (it == builds.end() || it->id != id) return std::nullopt;
  return static_cast<std::size_t>(it - builds.begin());
}

void check_invariants(const BuildHistory& history) {
  for (std::size_t i = 0; i < history.builds.size(); ++i) {
    const Build& b = history.builds[i];
    if (i > 0 && !(history.builds[i - 1].id < b.id))
      throw Error(Errc::Invariant, fmt::format("builds not strictly ordered at {}", b.id.ordinal));
    std::set<TestId> seen;
    for (const auto& r : b.records) {
      if (r.build != b.id)
        throw Error(Errc::Invariant, fmt::format("record of build {} filed under {}",
                                                 r.build.ordinal, b.id.ordinal));
      if (!seen.insert(r.test).second)
        throw Error(Errc::Invariant, fmt::format("duplicate record for {} in build {}",
                                                 r.test.path(), b.id.ordinal));
    }
    for (const auto& f : b.change_set.impacted_files)
      if (b.change_set.changed_files.count(f))
        throw Error(Errc::Invariant, fmt::format("{} both changed and impacted", f));
  }
}

}  // namespace tcp
