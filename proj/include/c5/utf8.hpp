#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace c5::utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;

/// Decodes arbitrary bytes as UTF-8, replacing every maximal invalid
/// subsequence with U+FFFD. The result is always valid UTF-8.
std::string decode_lossy(std::string_view bytes);

[[nodiscard]] bool is_valid(std::string_view bytes);

/// Reads the code point starting at `pos` and advances `pos` past it.
/// Input must be valid UTF-8.
char32_t next(std::string_view s, std::size_t &pos);

void append(std::string &out, char32_t cp);

std::u32string to_u32(std::string_view s);
std::string from_u32(std::u32string_view s);

/// Simple lowercase mapping covering Latin (incl. Latin Extended-A),
/// Greek and Cyrillic. Anything else maps to itself.
char32_t fold_case(char32_t cp);
std::string fold_case(std::string_view s);

bool is_space(char32_t cp);

/// Letters, digits and combining marks; everything that does not
/// delimit a word.
bool is_word_char(char32_t cp);

/// Whitespace-delimited tokens (Unicode whitespace).
std::vector<std::string_view> split_whitespace(std::string_view s);

/// Collapses whitespace runs to one ASCII space and trims both ends.
std::string collapse_whitespace(std::string_view s);

/// Byte offset of the last non-whitespace code point, or npos.
std::size_t last_non_space(std::string_view s);

}  // namespace c5::utf8
