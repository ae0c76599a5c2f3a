#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace varmt::utf8 {

/// Splits a UTF-8 string into its Unicode scalar values, each returned as its
/// own UTF-8 encoded string. Invalid lead bytes are passed through one byte at
/// a time.
std::vector<std::string> split_chars(std::string_view text);

/// Number of scalar values in `text`.
std::size_t length(std::string_view text);

/// Whitespace tokenization on ASCII space/tab/CR/LF.
std::vector<std::string> split_words(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace varmt::utf8
