#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace morphbert::utf8 {

// Byte offset of the first ill-formed sequence, or nullopt if `text` is
// well-formed UTF-8 (no overlongs, surrogates, or code points > U+10FFFF).
std::optional<std::size_t> first_invalid(std::string_view text);

// Splits well-formed UTF-8 into one view per code point.
std::vector<std::string_view> code_points(std::string_view text);

// Decodes the code point starting at text[0]. Precondition: well-formed.
char32_t decode(std::string_view text);

// Unicode NFC normalization.
std::string nfc(std::string_view text);

// Full Unicode case folding.
std::string casefold(std::string_view text);

// Letters, combining marks and digits. Subword merges never cross a boundary
// between word characters and everything else (punctuation, symbols).
bool is_word_char(char32_t cp);

bool is_lower(char32_t cp);

// ASCII whitespace plus the Unicode space separators.
bool is_space(char32_t cp);

// Collapses every whitespace run to one ASCII space and trims both ends.
std::string collapse_whitespace(std::string_view text);

// Splits on whitespace runs (as defined by is_space).
std::vector<std::string_view> split_words(std::string_view text);

}  // namespace morphbert::utf8
