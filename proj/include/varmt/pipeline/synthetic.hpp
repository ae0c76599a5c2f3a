#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "varmt/textproc/corpus.hpp"

namespace varmt {

struct SubstitutionRule {
  std::string from;
  std::string to;
  double probability = 1.0;
};

/// Character rules rewrite single characters inside words; lexical rules
/// replace whole words and take precedence over character rules.
struct SyntheticVarietySpec {
  std::vector<SubstitutionRule> char_rules;
  std::vector<SubstitutionRule> lexical_rules;

  bool empty() const { return char_rules.empty() && lexical_rules.empty(); }
  /// Character rule sources must be single characters with distinct
  /// sources and targets; lexical rules must have distinct sources.
  void validate() const;
};

/// Swaps from/to of every rule. Exact inverse when all probabilities are 1
/// and no character-rule output collides with a lexical-rule target.
SyntheticVarietySpec invert(const SyntheticVarietySpec& spec);

struct SyntheticVariety {
  MonoCorpus tgt;
  /// std word -> tgt word for every word occurrence; with probability < 1 a
  /// word may map to several variants, the last one seen is kept.
  std::map<std::string, std::string> gold;
};

std::string apply_variety_word(const SyntheticVarietySpec& spec, const std::string& word,
                               std::mt19937_64& rng);

SyntheticVariety generate_synthetic_pair(const SyntheticVarietySpec& spec, const MonoCorpus& std_corpus,
                                         std::uint64_t seed);

/// Five character rules (ы->і, э->є, ё->ї, ъ->ґ, щ->ў) and lexical rules for
/// the `lexical` most frequent words of at least three characters, each
/// mapped to a fresh invented word. Probability 1 throughout.
SyntheticVarietySpec default_variety_spec(const MonoCorpus& std_corpus, std::size_t lexical = 50,
                                          std::uint64_t seed = 1);

/// |V_std ∩ V_tgt| / |V_tgt| over whitespace-separated word types.
double vocabulary_overlap(const MonoCorpus& std_corpus, const MonoCorpus& tgt_corpus);

/// Spec file: one rule per line, "char|word<TAB>from<TAB>to<TAB>probability".
void save_variety_spec(const std::filesystem::path& path, const SyntheticVarietySpec& spec);
SyntheticVarietySpec load_variety_spec(const std::filesystem::path& path);

/// Toy src/std language pair plus a derived tgt variety. std is
/// Cyrillic-like with topics, number agreement and adjective-noun order;
/// src is a Latin transliteration with noun-adjective order.
struct FixtureConfig {
  std::size_t train_pairs = 20000;
  std::size_t dev_pairs = 300;
  std::size_t test_pairs = 500;
  std::size_t std_mono_extra = 20000;
  std::size_t tgt_mono = 10000;
  std::size_t nouns = 300;
  std::size_t verbs = 100;
  std::size_t adjectives = 100;
  std::size_t topics = 12;
  std::size_t lexical_rules = 50;
  std::uint64_t seed = 1;
};

struct SyntheticFixture {
  ParallelCorpus train;  // (src, std)
  ParallelCorpus dev;    // (src, std)
  MonoCorpus std_mono;   // std side of train plus extra sentences
  MonoCorpus tgt_mono;
  MonoCorpus tgt_mono_src;  // true src of every tgt_mono sentence
  ParallelCorpus test;      // (src, tgt)
  MonoCorpus test_std;      // std reference of every test sentence
  SyntheticVarietySpec spec;
};

SyntheticFixture make_fixture(const FixtureConfig& config);

/// Writes train.src/.std, dev.src/.std, std.mono, tgt.mono, tgt.mono.src,
/// test.src/.tgt/.std and variety.tsv under `dir`.
void write_fixture(const std::filesystem::path& dir, const SyntheticFixture& fixture);

}  // namespace varmt
