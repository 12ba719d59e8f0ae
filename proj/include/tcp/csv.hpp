#pragma once

// Minimal RFC 4180 reader/writer: quoted fields, doubled quotes, embedded
// newlines. UTF-8 in, UTF-8 out, LF line endings.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tcp::csv {

using Row = std::vector<std::string>;

struct Table {
  Row header;
  std::vector<Row> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  /// Column index by name, or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
  /// Column index by name; throws SchemaError naming `source` when absent.
  std::size_t require(std::string_view name, std::string_view source) const;
};

Table parse(std::string_view text);
Table read_file(const std::filesystem::path& path);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

}  // namespace tcp::csv
