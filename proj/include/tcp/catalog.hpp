#pragma once

// The canonical ordered list of the 150 features and their nine groups.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tcp {

enum class FeatureGroup { TES_COM, TES_PRO, TES_CHN, REC, F_COV, COD_COV_COM, COD_COV_PRO, COD_COV_CHN, DET_COV };
inline constexpr int kFeatureGroupCount = 9;
inline constexpr int kFeatureCount = 150;

const std::array<FeatureGroup, kFeatureGroupCount>& all_feature_groups();
std::string_view group_name(FeatureGroup g);
std::optional<FeatureGroup> group_from_name(std::string_view name);

struct FeatureDef {
  FeatureGroup group;
  std::string name;
  friend bool operator==(const FeatureDef&, const FeatureDef&) = default;
};

class FeatureCatalog {
 public:
  explicit FeatureCatalog(std::vector<FeatureDef> defs);

  /// The built-in 150-feature catalog.
  static const FeatureCatalog& standard();

  std::size_t size() const noexcept { return defs_.size(); }
  const FeatureDef& operator[](std::size_t i) const { return defs_[i]; }
  const std::vector<FeatureDef>& defs() const noexcept { return defs_; }
  std::optional<int> index(std::string_view name) const;
  /// index() or UnknownFeature.
  int require(std::string_view name) const;
  /// [begin, end) of a group; groups are contiguous.
  std::pair<int, int> group_range(FeatureGroup g) const;

  /// FNV-1a over "group:name\n" lines.
  std::uint64_t fingerprint() const;
  std::string fingerprint_hex() const;

  /// `index,group,name` CSV.
  std::string to_csv() const;
  static FeatureCatalog from_csv(std::string_view text);
  static FeatureCatalog load(const std::filesystem::path& path);

  friend bool operator==(const FeatureCatalog& a, const FeatureCatalog& b) { return a.defs_ == b.defs_; }

 private:
  std::vector<FeatureDef> defs_;
};

/// Throws CatalogMismatch naming the first differing entry.
void verify_catalog(const FeatureCatalog& expected, const FeatureCatalog& actual);

}  // namespace tcp
