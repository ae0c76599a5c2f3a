#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "varmt/textproc/bpe.hpp"

namespace varmt {

inline constexpr std::size_t kDefaultMinN = 3;
inline constexpr std::size_t kDefaultMaxN = 6;

/// Character n-grams of "<" + surface-without-marker + ">", ordered by start
/// position then length. Lengths count Unicode scalar values. The marker never
/// contributes characters, so "при@@" and "при" share every n-gram.
std::vector<std::string> extract_ngrams(const SubwordToken& token, std::size_t min_n,
                                        std::size_t max_n,
                                        std::string_view marker = kDefaultBpeMarker);

std::vector<std::string> extract_ngrams(std::string_view surface, std::size_t min_n,
                                        std::size_t max_n,
                                        std::string_view marker = kDefaultBpeMarker);

}  // namespace varmt
