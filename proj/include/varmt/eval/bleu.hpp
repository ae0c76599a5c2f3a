#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace varmt {

/// Corpus BLEU-4. `precisions` are fractions in [0, 1]; `score` is 0..100.
struct BleuScore {
  double score = 0.0;
  std::array<double, 4> precisions{};
  double brevity_penalty = 0.0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
};

/// none: any zero n-gram precision (or an order with no n-grams at all) gives
/// score 0. exp: sacreBLEU's "exp" smoothing for zero-match orders.
enum class BleuSmoothing { none, exp };

/// The "13a" (mteval-v13a) tokenizer: unescapes &quot; &amp; &lt; &gt;,
/// splits ASCII punctuation/symbols, splits '.' and ',' except between
/// digits, splits '-' after a digit, collapses whitespace.
std::string tokenize_13a(std::string_view line);

BleuScore bleu(const std::vector<std::string>& hypotheses,
               const std::vector<std::string>& references,
               BleuSmoothing smoothing = BleuSmoothing::none);

}  // namespace varmt
