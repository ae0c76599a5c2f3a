#include "varmt/textproc/ngrams.hpp"

#include "varmt/common/error.hpp"
#include "varmt/common/utf8.hpp"

namespace varmt {

std::vector<std::string> extract_ngrams(std::string_view surface, std::size_t min_n,
                                        std::size_t max_n, std::string_view marker) {
  if (min_n < 1 || min_n > max_n) throw Error("extract_ngrams: need 1 <= min_n <= max_n");
  const std::string_view residual = strip_marker(surface, marker);
  if (residual.empty()) throw Error("extract_ngrams: empty token surface");

  std::vector<std::string> chars{"<"};
  for (auto& c : utf8::split_chars(residual)) chars.push_back(std::move(c));
  chars.emplace_back(">");

  std::vector<std::string> out;
  for (std::size_t i = 0; i < chars.size(); ++i) {
    std::string gram;
    for (std::size_t n = 1; n <= max_n && i + n <= chars.size(); ++n) {
      gram += chars[i + n - 1];
      if (n >= min_n) out.push_back(gram);
    }
  }
  return out;
}

std::vector<std::string> extract_ngrams(const SubwordToken& token, std::size_t min_n,
                                        std::size_t max_n, std::string_view marker) {
  return extract_ngrams(std::string_view(token.surface), min_n, max_n, marker);
}

}  // namespace varmt
