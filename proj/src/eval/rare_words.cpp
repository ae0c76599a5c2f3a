#include "varmt/eval/rare_words.hpp"

#include <algorithm>
#include <map>

#include "varmt/common/error.hpp"
#include "varmt/common/utf8.hpp"

namespace varmt {

std::vector<FrequencyBucket> default_frequency_buckets() {
  return {{1, 2, "1"},        {2, 3, "2"},          {3, 4, "3"},           {4, 5, "4"},
          {5, 10, "[5,10)"}, {10, 100, "[10,100)"}, {100, 1000, "[100,1000)"}};
}

FrequencyTable word_frequencies(const MonoCorpus& corpus) {
  FrequencyTable t;
  for (const auto& s : corpus.sentences)
    for (const auto& w : utf8::split_words(s)) ++t[w];
  return t;
}

std::vector<BucketAccuracy> rare_word_accuracy(const std::vector<std::string>& hypotheses,
                                               const std::vector<std::string>& references,
                                               const FrequencyTable& frequencies,
                                               const std::vector<FrequencyBucket>& buckets) {
  if (hypotheses.size() != references.size())
    throw Error("rare_word_accuracy: hypothesis and reference counts differ");
  std::vector<BucketAccuracy> out;
  for (const auto& b : buckets) out.push_back(BucketAccuracy{b, 0, 0, std::nullopt});

  for (std::size_t s = 0; s < references.size(); ++s) {
    std::map<std::string, std::size_t> available;
    for (const auto& w : utf8::split_words(hypotheses[s])) ++available[w];
    for (const auto& w : utf8::split_words(references[s])) {
      auto f = frequencies.find(w);
      const std::int64_t freq = f == frequencies.end() ? 0 : f->second;
      for (auto& acc : out) {
        if (freq < acc.bucket.lo || freq >= acc.bucket.hi) continue;
        ++acc.occurrences;
        auto it = available.find(w);
        if (it != available.end() && it->second > 0) {
          --it->second;
          ++acc.matched;
        }
        break;
      }
    }
  }
  for (auto& acc : out)
    if (acc.occurrences > 0)
      acc.accuracy = static_cast<double>(acc.matched) / static_cast<double>(acc.occurrences);
  return out;
}

}  // namespace varmt
