#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "varmt/textproc/corpus.hpp"

namespace varmt {

/// Half-open frequency range [lo, hi).
struct FrequencyBucket {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::string label;
};

/// 1, 2, 3, 4, [5,10), [10,100), [100,1000).
std::vector<FrequencyBucket> default_frequency_buckets();

struct BucketAccuracy {
  FrequencyBucket bucket;
  std::size_t occurrences = 0;
  std::size_t matched = 0;
  /// Absent when no reference word fell in the bucket.
  std::optional<double> accuracy;
};

using FrequencyTable = std::unordered_map<std::string, std::int64_t>;

/// Whitespace word counts over a corpus.
FrequencyTable word_frequencies(const MonoCorpus& corpus);

/// Clipped bag-of-words recall per frequency bucket: each reference word
/// occurrence counts as matched while the paired hypothesis still has an
/// unused copy of the same word. Case-sensitive.
std::vector<BucketAccuracy> rare_word_accuracy(const std::vector<std::string>& hypotheses,
                                               const std::vector<std::string>& references,
                                               const FrequencyTable& frequencies,
                                               const std::vector<FrequencyBucket>& buckets);

}  // namespace varmt
