#pragma once

// Internal JSON helpers shared by the model serialisers.

#include <string_view>

#include "json.hpp"
#include "tcp/boosting.hpp"

namespace tcp::detail {

using nlohmann::json;

json tree_to_json(const gbt::RegressionTree& tree);
gbt::RegressionTree tree_from_json(const json& j);

/// Throws Errc::SchemaError unless j["format"] == format and j["version"] == version.
void expect_format(const json& j, std::string_view format, int version);

}  // namespace tcp::detail
