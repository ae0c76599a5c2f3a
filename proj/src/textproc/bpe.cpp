#include "varmt/textproc/bpe.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "varmt/common/error.hpp"
#include "varmt/common/utf8.hpp"

namespace varmt {
namespace {

using PairKey = std::uint64_t;

PairKey pair_key(std::uint32_t a, std::uint32_t b) {
  return (static_cast<PairKey>(a) << 32) | b;
}

std::string rank_key(std::string_view a, std::string_view b) {
  std::string k;
  k.reserve(a.size() + b.size() + 1);
  k.append(a);
  k.push_back(' ');
  k.append(b);
  return k;
}

// Incremental pair statistics. Only words containing the merged pair are
// re-counted after each merge.
class MergeLearner {
 public:
  explicit MergeLearner(const std::vector<const MonoCorpus*>& corpora) {
    std::map<std::string, std::int64_t> counts;
    for (const auto* c : corpora)
      for (const auto& s : c->sentences)
        for (auto& w : utf8::split_words(s)) ++counts[w];
    for (const auto& [word, freq] : counts) {
      std::vector<std::uint32_t> syms;
      for (const auto& ch : utf8::split_chars(word)) syms.push_back(intern(ch));
      words_.push_back(std::move(syms));
      freqs_.push_back(freq);
    }
    for (std::size_t w = 0; w < words_.size(); ++w) add_word(w, +1);
  }

  std::vector<std::pair<std::string, std::string>> run(std::size_t num_merges) {
    std::vector<std::pair<std::string, std::string>> merges;
    while (merges.size() < num_merges && !queue_.empty()) {
      const Entry best = *queue_.begin();
      merges.emplace_back(symbols_[best.left], symbols_[best.right]);
      apply_merge(best.left, best.right);
    }
    return merges;
  }

 private:
  struct Entry {
    std::int64_t count;
    std::uint32_t left;
    std::uint32_t right;
  };
  struct EntryOrder {
    const std::vector<std::string>* symbols;
    bool operator()(const Entry& x, const Entry& y) const {
      if (x.count != y.count) return x.count > y.count;
      const auto& sx = (*symbols)[x.left];
      const auto& sy = (*symbols)[y.left];
      if (sx != sy) return sx < sy;
      return (*symbols)[x.right] < (*symbols)[y.right];
    }
  };

  std::uint32_t intern(const std::string& s) {
    auto [it, inserted] = ids_.try_emplace(s, static_cast<std::uint32_t>(symbols_.size()));
    if (inserted) symbols_.push_back(s);
    return it->second;
  }

  void bump(std::uint32_t a, std::uint32_t b, std::int64_t delta) {
    const PairKey k = pair_key(a, b);
    auto& c = counts_[k];
    if (c > 0) queue_.erase(Entry{c, a, b});
    c += delta;
    if (c > 0) queue_.insert(Entry{c, a, b});
  }

  void add_word(std::size_t w, int sign) {
    const auto& syms = words_[w];
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      bump(syms[i], syms[i + 1], sign * freqs_[w]);
      if (sign > 0) where_[pair_key(syms[i], syms[i + 1])].insert(static_cast<std::uint32_t>(w));
    }
  }

  void apply_merge(std::uint32_t a, std::uint32_t b) {
    const std::uint32_t merged = intern(symbols_[a] + symbols_[b]);
    const PairKey k = pair_key(a, b);
    const std::set<std::uint32_t> affected = std::move(where_[k]);
    where_.erase(k);
    for (std::uint32_t w : affected) {
      auto& syms = words_[w];
      bool present = false;
      for (std::size_t i = 0; i + 1 < syms.size(); ++i)
        if (syms[i] == a && syms[i + 1] == b) present = true;
      if (!present) continue;
      add_word(w, -1);
      std::vector<std::uint32_t> next;
      next.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size();) {
        if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
          next.push_back(merged);
          i += 2;
        } else {
          next.push_back(syms[i]);
          ++i;
        }
      }
      syms = std::move(next);
      add_word(w, +1);
    }
  }

  std::vector<std::string> symbols_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<std::vector<std::uint32_t>> words_;
  std::vector<std::int64_t> freqs_;
  std::unordered_map<PairKey, std::int64_t> counts_;
  std::unordered_map<PairKey, std::set<std::uint32_t>> where_;
  std::set<Entry, EntryOrder> queue_{EntryOrder{&symbols_}};
};

}  // namespace

BpeCodes learn_bpe(const MonoCorpus& corpus, std::size_t num_merges) {
  if (corpus.empty()) throw Error("learn_bpe: empty corpus");
  MergeLearner learner({&corpus});
  BpeCodes codes;
  codes.merges = learner.run(num_merges);
  return codes;
}

BpeCodes learn_joint_bpe(const MonoCorpus& std_corpus, const MonoCorpus& tgt_corpus,
                         std::size_t num_merges) {
  if (std_corpus.empty() || tgt_corpus.empty()) throw Error("learn_joint_bpe: empty corpus");
  MergeLearner learner({&std_corpus, &tgt_corpus});
  BpeCodes codes;
  codes.merges = learner.run(num_merges);
  return codes;
}

void save_bpe_codes(const std::filesystem::path& path, const BpeCodes& codes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << kBpeCodesHeader << '\n';
  for (const auto& [l, r] : codes.merges) out << l << ' ' << r << '\n';
}

BpeCodes load_bpe_codes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kBpeCodesHeader)
    throw FormatError(path.string() + ": missing BPE codes header");
  BpeCodes codes;
  std::set<std::pair<std::string, std::string>> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto parts = utf8::split_words(line);
    if (parts.size() != 2)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 'left right'");
    if (!seen.emplace(parts[0], parts[1]).second)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": duplicate merge");
    codes.merges.emplace_back(parts[0], parts[1]);
  }
  return codes;
}

BpeSegmenter::BpeSegmenter(BpeCodes codes) : codes_(std::move(codes)) {
  for (std::size_t i = 0; i < codes_.merges.size(); ++i)
    rank_.try_emplace(rank_key(codes_.merges[i].first, codes_.merges[i].second), i);
}

std::vector<std::string> BpeSegmenter::segment_word(std::string_view word) const {
  auto syms = utf8::split_chars(word);
  while (syms.size() > 1) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    std::size_t best_pos = 0;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      auto it = rank_.find(rank_key(syms[i], syms[i + 1]));
      if (it != rank_.end() && it->second < best_rank) {
        best_rank = it->second;
        best_pos = i;
      }
    }
    if (best_rank == std::numeric_limits<std::size_t>::max()) break;
    const std::string left = syms[best_pos];
    const std::string right = syms[best_pos + 1];
    std::vector<std::string> next;
    next.reserve(syms.size());
    for (std::size_t i = 0; i < syms.size();) {
      if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
        next.push_back(left + right);
        i += 2;
      } else {
        next.push_back(std::move(syms[i]));
        ++i;
      }
    }
    syms = std::move(next);
  }
  return syms;
}

std::vector<SubwordToken> BpeSegmenter::apply(std::string_view sentence) const {
  std::vector<SubwordToken> out;
  for (const auto& word : utf8::split_words(sentence)) {
    auto pieces = segment_word(word);
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      const bool cont = i + 1 < pieces.size();
      out.push_back(SubwordToken{cont ? pieces[i] + codes_.marker : pieces[i], cont});
    }
  }
  return out;
}

std::vector<std::string> BpeSegmenter::tokenize(std::string_view sentence) const {
  std::vector<std::string> out;
  for (auto& t : apply(sentence)) out.push_back(std::move(t.surface));
  return out;
}

TokenizedCorpus BpeSegmenter::tokenize_corpus(const MonoCorpus& corpus) const {
  TokenizedCorpus out;
  out.reserve(corpus.size());
  for (const auto& s : corpus.sentences) out.push_back(tokenize(s));
  return out;
}

std::vector<SubwordToken> apply_bpe(const BpeCodes& codes, std::string_view sentence) {
  return BpeSegmenter(codes).apply(sentence);
}

SubwordToken make_token(std::string surface, std::string_view marker) {
  const bool cont = surface.size() > marker.size() && surface.ends_with(marker);
  return SubwordToken{std::move(surface), cont};
}

std::string_view strip_marker(std::string_view surface, std::string_view marker) {
  if (surface.ends_with(marker)) surface.remove_suffix(marker.size());
  return surface;
}

std::string restore_bpe(const std::vector<SubwordToken>& tokens, std::string_view marker) {
  std::string out;
  bool in_word = false;
  for (const auto& t : tokens) {
    if (!in_word && !out.empty()) out.push_back(' ');
    if (t.is_continuation) {
      out.append(strip_marker(t.surface, marker));
      in_word = true;
    } else {
      out.append(t.surface);
      in_word = false;
    }
  }
  if (in_word) throw Error("restore_bpe: dangling continuation token at end of sequence");
  return out;
}

std::string restore_bpe(const std::vector<std::string>& surfaces, std::string_view marker) {
  std::vector<SubwordToken> tokens;
  tokens.reserve(surfaces.size());
  for (const auto& s : surfaces) tokens.push_back(make_token(s, marker));
  return restore_bpe(tokens, marker);
}

}  // namespace varmt
