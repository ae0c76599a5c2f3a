#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace varmt {

/// One sentence per entry, in file order.
struct MonoCorpus {
  std::vector<std::string> sentences;
  std::string language_tag;

  bool empty() const { return sentences.empty(); }
  std::size_t size() const { return sentences.size(); }
};

/// Sentences after subword segmentation; each token keeps its continuation
/// marker so the original text can be restored.
using TokenizedCorpus = std::vector<std::vector<std::string>>;

enum class Origin { gold, pseudo };

/// Sentence-aligned (src, tgt-side) pairs.
struct ParallelCorpus {
  std::vector<std::pair<std::string, std::string>> pairs;
  Origin origin = Origin::gold;

  bool empty() const { return pairs.empty(); }
  std::size_t size() const { return pairs.size(); }
};

struct TokenizedPair {
  std::vector<std::string> src;
  std::vector<std::string> tgt;
};
using TokenizedParallel = std::vector<TokenizedPair>;

MonoCorpus read_mono_corpus(const std::filesystem::path& path, std::string language_tag);
void write_mono_corpus(const std::filesystem::path& path, const MonoCorpus& corpus);

/// Reads a corpus that is already segmented (tokens separated by spaces).
TokenizedCorpus read_tokenized(const std::filesystem::path& path);
void write_tokenized(const std::filesystem::path& path, const TokenizedCorpus& corpus);

/// Two line-aligned files; a line-count mismatch or an empty side is an error.
ParallelCorpus read_parallel(const std::filesystem::path& src, const std::filesystem::path& tgt,
                             Origin origin = Origin::gold);
void write_parallel(const std::filesystem::path& src, const std::filesystem::path& tgt,
                    const ParallelCorpus& corpus);

/// Pairs of pre-segmented files.
TokenizedParallel read_tokenized_parallel(const std::filesystem::path& src,
                                          const std::filesystem::path& tgt);

}  // namespace varmt
