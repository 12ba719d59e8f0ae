#include "tcp/log.hpp"

#include <atomic>
#include <cstdio>

#include <fmt/format.h>

namespace tcp {
namespace {
std::atomic<bool> quiet{false};
}

void warn(std::string_view message) {
  if (!quiet.load()) fmt::print(stderr, "warning: {}\n", message);
}

QuietWarnings::QuietWarnings() : previous_(quiet.exchange(true)) {}
QuietWarnings::~QuietWarnings() { quiet.store(previous_); }

}  // namespace tcp
