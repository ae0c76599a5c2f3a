#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "varmt/textproc/corpus.hpp"

namespace varmt {

inline constexpr std::string_view kDefaultBpeMarker = "@@";
inline constexpr std::string_view kBpeCodesHeader = "#version: varmt-bpe-1";

/// Ordered merge rules. Merge i was learned before merge i+1 and is applied
/// before it.
struct BpeCodes {
  std::vector<std::pair<std::string, std::string>> merges;
  std::string marker{kDefaultBpeMarker};

  std::size_t num_merges() const { return merges.size(); }
};

/// A segmented piece of a word. Non-final pieces end with the marker.
struct SubwordToken {
  std::string surface;
  bool is_continuation = false;

  bool operator==(const SubwordToken&) const = default;
};

/// Greedy pair-frequency merge learning over whitespace-split words. Pairs are
/// counted within words only; ties go to the lexicographically smallest
/// (left, right). Learning stops early when no adjacent pair remains.
BpeCodes learn_bpe(const MonoCorpus& corpus, std::size_t num_merges);

/// learn_bpe over the concatenation std ++ tgt.
BpeCodes learn_joint_bpe(const MonoCorpus& std_corpus, const MonoCorpus& tgt_corpus,
                         std::size_t num_merges);

void save_bpe_codes(const std::filesystem::path& path, const BpeCodes& codes);
BpeCodes load_bpe_codes(const std::filesystem::path& path);

/// Applies a fixed set of merges. Holds the rank table so repeated
/// segmentation does not rebuild it; immutable after construction.
class BpeSegmenter {
 public:
  explicit BpeSegmenter(BpeCodes codes);

  std::vector<std::string> segment_word(std::string_view word) const;
  std::vector<SubwordToken> apply(std::string_view sentence) const;
  /// Token surfaces only.
  std::vector<std::string> tokenize(std::string_view sentence) const;
  TokenizedCorpus tokenize_corpus(const MonoCorpus& corpus) const;

  const BpeCodes& codes() const { return codes_; }

 private:
  BpeCodes codes_;
  std::unordered_map<std::string, std::size_t> rank_;
};

std::vector<SubwordToken> apply_bpe(const BpeCodes& codes, std::string_view sentence);

/// Inverse of apply_bpe. Throws when the last token still carries the marker.
std::string restore_bpe(const std::vector<SubwordToken>& tokens,
                        std::string_view marker = kDefaultBpeMarker);
std::string restore_bpe(const std::vector<std::string>& surfaces,
                        std::string_view marker = kDefaultBpeMarker);

SubwordToken make_token(std::string surface, std::string_view marker = kDefaultBpeMarker);

/// Surface with a trailing marker removed.
std::string_view strip_marker(std::string_view surface, std::string_view marker = kDefaultBpeMarker);

}  // namespace varmt
