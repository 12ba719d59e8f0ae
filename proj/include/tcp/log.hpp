#pragma once

#include <string_view>

namespace tcp {

/// Diagnostics on stderr, prefixed "warning: ".
void warn(std::string_view message);

/// Silences warn() while alive (used by tests exercising error paths).
class QuietWarnings {
 public:
  QuietWarnings();
  ~QuietWarnings();
  QuietWarnings(const QuietWarnings&) = delete;
  QuietWarnings& operator=(const QuietWarnings&) = delete;

 private:
  bool previous_;
};

}  // namespace tcp
