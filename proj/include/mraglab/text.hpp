#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mraglab::text {

/// NFC-normalizes UTF-8 input. Invalid UTF-8 raises std::invalid_argument.
std::string nfc(std::string_view utf8);

/// Full Unicode case folding followed by NFC.
std::string casefold(std::string_view utf8);

/// Strips leading and trailing Unicode whitespace.
std::string trim(std::string_view utf8);

std::u32string to_codepoints(std::string_view utf8);
std::string to_utf8(std::u32string_view codepoints);

std::size_t codepoint_length(std::string_view utf8);

/// Returns the first `max_codepoints` code points of the input.
std::string truncate_codepoints(std::string_view utf8, std::size_t max_codepoints);

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace mraglab::text
