#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "varmt/textproc/corpus.hpp"

namespace varmt {

using TokenId = std::int32_t;

/// Dense token <-> id map. Ids are assigned in insertion order.
class Vocabulary {
 public:
  static constexpr std::string_view kPad = "<pad>";
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr std::string_view kEos = "</s>";
  static constexpr TokenId kPadId = 0;
  static constexpr TokenId kUnkId = 1;
  static constexpr TokenId kEosId = 2;
  static constexpr TokenId kNumSpecials = 3;

  Vocabulary() = default;

  /// Vocabulary starting with <pad>, <unk>, </s> at ids 0, 1, 2.
  static Vocabulary with_specials();

  /// Specials first, then every token of `corpus` with count >= min_count in
  /// order of first appearance.
  static Vocabulary build(const TokenizedCorpus& corpus, std::size_t min_count = 1);

  TokenId add(const std::string& token);
  std::optional<TokenId> find(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool has_specials() const;

  /// Maps tokens to ids. Unknown tokens become <unk> when `allow_unk`,
  /// otherwise an Error naming the token is thrown.
  std::vector<TokenId> encode(const std::vector<std::string>& tokens, bool allow_unk) const;
  std::vector<std::string> decode(const std::vector<TokenId>& ids) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace varmt
