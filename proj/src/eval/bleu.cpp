#include "varmt/eval/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <unordered_map>

#include "varmt/common/error.hpp"
#include "varmt/common/utf8.hpp"

namespace varmt {
namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& words, std::size_t n) {
  NgramCounts counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    std::string key = words[i];
    for (std::size_t k = 1; k < n; ++k) {
      key.push_back(' ');
      key += words[i + k];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

std::string tokenize_13a(std::string_view raw) {
  static const std::regex kSymbols(R"(([\{-\~\[-\` -\&\(-\+\:-\@\/]))");
  static const std::regex kPeriodCommaAfter(R"(([^0-9])([\.,]))");
  static const std::regex kPeriodCommaBefore(R"(([\.,])([^0-9]))");
  static const std::regex kDashAfterDigit(R"(([0-9])(-))");

  std::string line(raw);
  replace_all(line, "<skipped>", "");
  replace_all(line, "-\n", "");
  replace_all(line, "\n", " ");
  if (line.find('&') != std::string::npos) {
    replace_all(line, "&quot;", "\"");
    replace_all(line, "&amp;", "&");
    replace_all(line, "&lt;", "<");
    replace_all(line, "&gt;", ">");
  }
  line = " " + line + " ";
  line = std::regex_replace(line, kSymbols, " $1 ");
  line = std::regex_replace(line, kPeriodCommaAfter, "$1 $2 ");
  line = std::regex_replace(line, kPeriodCommaBefore, " $1 $2");
  line = std::regex_replace(line, kDashAfterDigit, "$1 $2 ");
  return utf8::join(utf8::split_words(line), " ");
}

BleuScore bleu(const std::vector<std::string>& hypotheses,
               const std::vector<std::string>& references, BleuSmoothing smoothing) {
  if (hypotheses.size() != references.size())
    throw Error("bleu: hypothesis and reference counts differ");
  if (references.empty()) throw Error("bleu: empty reference set");

  BleuScore out;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto hyp = utf8::split_words(tokenize_13a(hypotheses[s]));
    const auto ref = utf8::split_words(tokenize_13a(references[s]));
    out.hyp_len += hyp.size();
    out.ref_len += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto h = count_ngrams(hyp, n);
      const auto r = count_ngrams(ref, n);
      for (const auto& [gram, c] : h) {
        out.totals[n - 1] += c;
        auto it = r.find(gram);
        if (it != r.end()) out.matches[n - 1] += std::min(c, it->second);
      }
    }
  }

  if (out.hyp_len == 0) {
    out.brevity_penalty = 0.0;
  } else if (out.hyp_len < out.ref_len) {
    out.brevity_penalty =
        std::exp(1.0 - static_cast<double>(out.ref_len) / static_cast<double>(out.hyp_len));
  } else {
    out.brevity_penalty = 1.0;
  }

  double log_sum = 0.0;
  bool zero = false;
  double smooth = 1.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (out.totals[n] == 0) {
      zero = true;
      continue;
    }
    double p = static_cast<double>(out.matches[n]) / static_cast<double>(out.totals[n]);
    if (out.matches[n] == 0) {
      if (smoothing == BleuSmoothing::exp) {
        smooth *= 2.0;
        p = 1.0 / (smooth * static_cast<double>(out.totals[n]));
      } else {
        zero = true;
      }
    }
    out.precisions[n] = p;
    if (p > 0) log_sum += std::log(p);
  }
  out.score = zero ? 0.0 : 100.0 * out.brevity_penalty * std::exp(log_sum / 4.0);
  return out;
}

}  // namespace varmt
