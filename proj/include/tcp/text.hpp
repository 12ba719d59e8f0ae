#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tcp::text {

/// Token standing in for every URL.
inline constexpr std::string_view kUrlToken = "<url>";

/// Porter (1980) stemmer, reference C variant (bli/logi departures). Input
/// must be lowercase ASCII; other words pass through unchanged.
std::string porter_stem(std::string_view word);

/// porter_stem applied until it stops changing the word.
std::string stem(std::string_view word);

/// Bundled English stop-word list (318 words).
bool is_stop_word(std::string_view token);
const std::vector<std::string_view>& stop_words();

/// Lowercase, URLs to <url>, non-alphanumerics to spaces, stop words
/// dropped, stemmed. Idempotent on its own output joined by spaces.
std::vector<std::string> preprocess_message(std::string_view message);

}  // namespace tcp::text
