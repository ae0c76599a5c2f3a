#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "varmt/mt/model.hpp"
#include "varmt/mt/train.hpp"
#include "varmt/textproc/bpe.hpp"
#include "varmt/textproc/corpus.hpp"

namespace varmt {

/// Softmax-head std->src model ("standard settings"). `std_to_src` pairs
/// have the std side as .src and the src side as .tgt, both already
/// segmented with their own codes.
struct ReverseModel {
  mt::Seq2SeqModel model;
  mt::TrainResult result;
};
ReverseModel train_reverse_model(const TokenizedParallel& std_to_src, const mt::ModelConfig& config,
                                 const mt::TrainConfig& tc, const TokenizedParallel* dev = nullptr);

struct BacktranslationStats {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t dropped = 0;
  std::size_t truncated = 0;
  std::size_t unk_tokens = 0;
  std::size_t total_tokens = 0;
};

struct PseudoParallel {
  ParallelCorpus corpus;
  BacktranslationStats stats;
  /// Input line of every kept pair.
  std::vector<std::size_t> kept;
};

/// Maps a segmented sentence to segmented output; nullopt or an empty list
/// marks a failed translation.
using SegmentTranslator =
    std::function<std::optional<std::vector<std::string>>(const std::vector<std::string>& tokens)>;

/// Segments each tgt sentence with `tgt_codes`, translates it and joins the
/// output subwords back into text. Pairs are (translated src, original tgt
/// sentence) in input order; failures are dropped and counted.
PseudoParallel synthesize_with(const SegmentTranslator& translate, const MonoCorpus& tgt_mono,
                               const BpeSegmenter& tgt_codes);

/// Back-translates with a trained reverse model; tokens unknown to the
/// model become <unk>. `threads` > 1 splits sentences across workers,
/// order is preserved. A corpus with no known token at all means the codes
/// do not belong to the model and is an error.
PseudoParallel synthesize_pseudo_parallel(const mt::Seq2SeqModel& reverse_model,
                                          const MonoCorpus& tgt_mono, const BpeSegmenter& tgt_codes,
                                          std::size_t beam = 5, std::size_t threads = 1);

/// Writes STEM.src, STEM.tgt and STEM.stats ("key=value" lines).
void write_pseudo_parallel(const std::filesystem::path& stem, const PseudoParallel& data);

/// Joins subwords into words; a dangling continuation marker at the end is
/// dropped instead of raising.
std::string join_subwords(const std::vector<std::string>& tokens,
                          std::string_view marker = kDefaultBpeMarker);

}  // namespace varmt
