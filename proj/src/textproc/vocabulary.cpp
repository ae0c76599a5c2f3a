#include "varmt/textproc/vocabulary.hpp"

#include "varmt/common/error.hpp"

namespace varmt {

Vocabulary Vocabulary::with_specials() {
  Vocabulary v;
  v.add(std::string(kPad));
  v.add(std::string(kUnk));
  v.add(std::string(kEos));
  return v;
}

Vocabulary Vocabulary::build(const TokenizedCorpus& corpus, std::size_t min_count) {
  std::unordered_map<std::string, std::size_t> counts;
  std::vector<std::string> order;
  for (const auto& s : corpus)
    for (const auto& t : s)
      if (counts[t]++ == 0) order.push_back(t);
  Vocabulary v = with_specials();
  for (const auto& t : order)
    if (counts[t] >= min_count) v.add(t);
  return v;
}

TokenId Vocabulary::add(const std::string& token) {
  auto [it, inserted] = index_.try_emplace(token, static_cast<TokenId>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::optional<TokenId> Vocabulary::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool Vocabulary::has_specials() const {
  return tokens_.size() >= static_cast<std::size_t>(kNumSpecials) && tokens_[0] == kPad &&
         tokens_[1] == kUnk && tokens_[2] == kEos;
}

std::vector<TokenId> Vocabulary::encode(const std::vector<std::string>& tokens,
                                        bool allow_unk) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto id = find(t);
    if (!id) {
      if (!allow_unk) throw Error("token outside vocabulary: '" + t + "'");
      ids.push_back(kUnkId);
    } else {
      ids.push_back(*id);
    }
  }
  return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<TokenId>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(token(id));
  return out;
}

}  // namespace varmt
