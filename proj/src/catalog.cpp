#include "tcp/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "tcp/analysis.hpp"
#include "tcp/core.hpp"
#include "tcp/csv.hpp"

namespace tcp {

const std::array<FeatureGroup, kFeatureGroupCount>& all_feature_groups() {
  static const std::array<FeatureGroup, kFeatureGroupCount> groups = {
      FeatureGroup::TES_COM,     FeatureGroup::TES_PRO,     FeatureGroup::TES_CHN,
      FeatureGroup::REC,         FeatureGroup::F_COV,       FeatureGroup::COD_COV_COM,
      FeatureGroup::COD_COV_PRO, FeatureGroup::COD_COV_CHN, FeatureGroup::DET_COV};
  return groups;
}

std::string_view group_name(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::TES_COM: return "TES_COM";
    case FeatureGroup::TES_PRO: return "TES_PRO";
    case FeatureGroup::TES_CHN: return "TES_CHN";
    case FeatureGroup::REC: return "REC";
    case FeatureGroup::F_COV: return "F_COV";
    case FeatureGroup::COD_COV_COM: return "COD_COV_COM";
    case FeatureGroup::COD_COV_PRO: return "COD_COV_PRO";
    case FeatureGroup::COD_COV_CHN: return "COD_COV_CHN";
    case FeatureGroup::DET_COV: return "DET_COV";
  }
  return "?";
}

std::optional<FeatureGroup> group_from_name(std::string_view name) {
  for (auto g : all_feature_groups())
    if (group_name(g) == name) return g;
  return std::nullopt;
}

namespace {

std::vector<FeatureDef> standard_defs() {
  std::vector<FeatureDef> d;
  auto add = [&](FeatureGroup g, std::string name) { d.push_back({g, std::move(name)}); };

  for (auto m : complexity_metric_names()) add(FeatureGroup::TES_COM, fmt::format("F_Test_{}", m));
  for (auto m : process_metric_names()) add(FeatureGroup::TES_PRO, fmt::format("F_Test_{}", m));
  for (auto m : change_metric_names()) add(FeatureGroup::TES_CHN, fmt::format("F_Test_{}", m));

  for (auto n : {"F_Age", "F_LastFailAge", "F_LastTransitionAge", "F_LastVerdict", "F_LastExeTime"})
    add(FeatureGroup::REC, n);
  for (auto n : {"AvgExeTime", "MaxExeTime", "FailRate", "AssertRate", "ExcRate", "TransitionRate"})
    for (auto w : {"Recent", "Total"}) add(FeatureGroup::REC, fmt::format("F_{}_{}", n, w));
  add(FeatureGroup::REC, "F_MaxTestFileFailRate");
  add(FeatureGroup::REC, "F_MaxTestFileTransitionRate");

  for (auto n : {"F_CovCCount", "F_CovICount", "F_SumCovCScore", "F_SumCovIScore"}) add(FeatureGroup::F_COV, n);

  for (auto set : {"C", "I"})
    for (auto m : complexity_metric_names()) add(FeatureGroup::COD_COV_COM, fmt::format("F_WSum{}_{}", set, m));
  for (auto set : {"C", "I"})
    for (auto m : process_metric_names()) add(FeatureGroup::COD_COV_PRO, fmt::format("F_WSum{}_{}", set, m));
  for (auto m : change_metric_names()) add(FeatureGroup::COD_COV_CHN, fmt::format("F_WSumC_{}", m));

  add(FeatureGroup::DET_COV, "F_WSumCovCFaults");
  add(FeatureGroup::DET_COV, "F_WSumCovIFaults");
  return d;
}

}  // namespace

FeatureCatalog::FeatureCatalog(std::vector<FeatureDef> defs) : defs_(std::move(defs)) {
  for (std::size_t i = 0; i < defs_.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (defs_[i].name == defs_[j].name)
        throw Error(Errc::CatalogMismatch, "duplicate feature name " + defs_[i].name);
}

const FeatureCatalog& FeatureCatalog::standard() {
  static const FeatureCatalog catalog(standard_defs());
  return catalog;
}

std::optional<int> FeatureCatalog::index(std::string_view name) const {
  for (std::size_t i = 0; i < defs_.size(); ++i)
    if (defs_[i].name == name) return static_cast<int>(i);
  return std::nullopt;
}

int FeatureCatalog::require(std::string_view name) const {
  auto i = index(name);
  if (!i) throw Error(Errc::UnknownFeature, fmt::format("unknown feature '{}'", name));
  return *i;
}

std::pair<int, int> FeatureCatalog::group_range(FeatureGroup g) const {
  int begin = -1;
  int end = -1;
  for (std::size_t i = 0; i < defs_.size(); ++i) {
    if (defs_[i].group != g) continue;
    if (begin < 0) begin = static_cast<int>(i);
    end = static_cast<int>(i) + 1;
  }
  if (begin < 0) return {0, 0};
  return {begin, end};
}

std::uint64_t FeatureCatalog::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& d : defs_) {
    for (char c : fmt::format("{}:{}\n", group_name(d.group), d.name)) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string FeatureCatalog::fingerprint_hex() const { return fmt::format("{:016x}", fingerprint()); }

std::string FeatureCatalog::to_csv() const {
  std::ostringstream out;
  csv::write_row(out, {"index", "group", "name"});
  for (std::size_t i = 0; i < defs_.size(); ++i)
    csv::write_row(out, {std::to_string(i), std::string(group_name(defs_[i].group)), defs_[i].name});
  return out.str();
}

FeatureCatalog FeatureCatalog::from_csv(std::string_view text) {
  auto table = csv::parse(text);
  const auto idx = table.require("index", "catalog");
  const auto grp = table.require("group", "catalog");
  const auto name = table.require("name", "catalog");
  std::vector<FeatureDef> defs;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size() || row[idx] != std::to_string(r))
      throw Error(Errc::SchemaError, fmt::format("catalog row {} is malformed", table.line_numbers[r]));
    auto g = group_from_name(row[grp]);
    if (!g) throw Error(Errc::SchemaError, fmt::format("catalog row {}: unknown group '{}'",
                                                       table.line_numbers[r], row[grp]));
    defs.push_back({*g, row[name]});
  }
  return FeatureCatalog(std::move(defs));
}

FeatureCatalog FeatureCatalog::load(const std::filesystem::path& path) {
  auto table_text = [&] {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }();
  return from_csv(table_text);
}

void verify_catalog(const FeatureCatalog& expected, const FeatureCatalog& actual) {
  if (expected.size() != actual.size())
    throw Error(Errc::CatalogMismatch,
                fmt::format("catalog has {} features, expected {}", actual.size(), expected.size()));
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (!(expected[i] == actual[i]))
      throw Error(Errc::CatalogMismatch,
                  fmt::format("feature {} is {}:{}, expected {}:{}", i, group_name(actual[i].group),
                              actual[i].name, group_name(expected[i].group), expected[i].name));
}

}  // namespace tcp
