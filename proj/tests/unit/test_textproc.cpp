#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "varmt/common/error.hpp"
#include "varmt/common/utf8.hpp"
#include "varmt/textproc/bpe.hpp"
#include "varmt/textproc/ngrams.hpp"
#include "varmt/textproc/vocabulary.hpp"

using namespace varmt;

namespace {

MonoCorpus corpus(std::vector<std::string> s) { return MonoCorpus{std::move(s), "x"}; }

using Merges = std::vector<std::pair<std::string, std::string>>;

std::string random_sentence(std::mt19937& rng, const std::vector<std::string>& alphabet) {
  std::uniform_int_distribution<int> nwords(1, 8), wlen(1, 7);
  std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1);
  std::string s;
  const int n = nwords(rng);
  for (int w = 0; w < n; ++w) {
    if (w) s += ' ';
    const int len = wlen(rng);
    for (int i = 0; i < len; ++i) s += alphabet[ch(rng)];
  }
  return s;
}

}  // namespace

TEST(LearnBpe, MostFrequentPairFirst) {
  // (a,a) occurs 4 times, (a,b) 3 times.
  auto codes = learn_bpe(corpus({"aaab", "aaab", "ab"}), 1);
  EXPECT_EQ(codes.merges, (Merges{{"a", "a"}}));
  EXPECT_EQ(codes.num_merges(), 1u);
}

TEST(LearnBpe, ZeroMergesIsCharacterLevel) {
  auto codes = learn_bpe(corpus({"hello world"}), 0);
  EXPECT_TRUE(codes.merges.empty());
}

TEST(LearnBpe, TieBreakIsLexicographic) {
  // Hand simulation: (l,o)=2 ties (o,w)=2 -> (l,o); then (lo,w)=2; then
  // (low,e)=1 ties (e,r)=1 -> (e,r).
  auto codes = learn_bpe(corpus({"low", "lower"}), 3);
  EXPECT_EQ(codes.merges, (Merges{{"l", "o"}, {"lo", "w"}, {"e", "r"}}));
}

TEST(LearnBpe, StopsWhenNoPairsRemain) {
  auto codes = learn_bpe(corpus({"ab"}), 10);
  EXPECT_EQ(codes.merges, (Merges{{"a", "b"}}));
}

TEST(LearnBpe, EmptyCorpusIsError) { EXPECT_THROW(learn_bpe(corpus({}), 3), Error); }

TEST(LearnBpe, Deterministic) {
  std::mt19937 rng(7);
  const std::vector<std::string> alphabet{"а", "б", "в", "г", "ы", "e", "o"};
  std::vector<std::string> s;
  for (int i = 0; i < 300; ++i) s.push_back(random_sentence(rng, alphabet));
  EXPECT_EQ(learn_bpe(corpus(s), 200).merges, learn_bpe(corpus(s), 200).merges);
}

TEST(LearnBpe, NoDuplicateMerges) {
  std::mt19937 rng(3);
  const std::vector<std::string> alphabet{"a", "b", "c"};
  std::vector<std::string> s;
  for (int i = 0; i < 200; ++i) s.push_back(random_sentence(rng, alphabet));
  auto codes = learn_bpe(corpus(s), 300);
  std::set<std::pair<std::string, std::string>> uniq(codes.merges.begin(), codes.merges.end());
  EXPECT_EQ(uniq.size(), codes.merges.size());
}

TEST(LearnJointBpe, EqualsConcatenation) {
  EXPECT_EQ(learn_joint_bpe(corpus({"ab"}), corpus({"ab"}), 5).merges,
            learn_bpe(corpus({"ab", "ab"}), 5).merges);
}

TEST(LearnJointBpe, DominantCorpusWins) {
  auto codes = learn_joint_bpe(corpus({"aa", "aa", "aa"}), corpus({"bb"}), 1);
  EXPECT_EQ(codes.merges, (Merges{{"a", "a"}}));
}

TEST(LearnJointBpe, DisjointAlphabetsInterleaveByFrequency) {
  // (a,b)=2 ties (b,c)=2 -> (a,b); (ab,c)=2; then (x,y)=1.
  auto codes = learn_joint_bpe(corpus({"abc", "abc"}), corpus({"xy"}), 3);
  EXPECT_EQ(codes.merges, (Merges{{"a", "b"}, {"ab", "c"}, {"x", "y"}}));
}

TEST(LearnJointBpe, EitherEmptyIsError) {
  EXPECT_THROW(learn_joint_bpe(corpus({}), corpus({"a"}), 1), Error);
  EXPECT_THROW(learn_joint_bpe(corpus({"a"}), corpus({}), 1), Error);
}

TEST(ApplyBpe, MergeThenMarkers) {
  BpeCodes codes;
  codes.merges = {{"a", "a"}};
  auto toks = apply_bpe(codes, "aaab");
  std::vector<SubwordToken> expect{{"aa@@", true}, {"a@@", true}, {"b", false}};
  EXPECT_EQ(toks, expect);
}

TEST(ApplyBpe, CharacterFallback) {
  auto toks = apply_bpe(BpeCodes{}, "cat");
  std::vector<SubwordToken> expect{{"c@@", true}, {"a@@", true}, {"t", false}};
  EXPECT_EQ(toks, expect);
}

TEST(ApplyBpe, WholeWordHasNoMarker) {
  auto codes = learn_bpe(corpus({"word word"}), 10);
  auto toks = apply_bpe(codes, "word");
  ASSERT_EQ(toks.size(), 1u);
  EXPECT_EQ(toks[0].surface, "word");
  EXPECT_FALSE(toks[0].is_continuation);
}

TEST(ApplyBpe, UnknownCharactersPassThrough) {
  auto codes = learn_bpe(corpus({"abab"}), 3);
  auto toks = apply_bpe(codes, "ab€");
  EXPECT_EQ(toks.back().surface, "€");
}

TEST(RestoreBpe, Inverse) {
  EXPECT_EQ(restore_bpe(std::vector<SubwordToken>{{"aa@@", true}, {"a@@", true}, {"b", false}}),
            "aaab");
  EXPECT_EQ(restore_bpe(std::vector<std::string>{"hello", "world"}), "hello world");
  EXPECT_THROW(restore_bpe(std::vector<std::string>{"x@@"}), Error);
}

TEST(RestoreBpe, RoundTripProperty) {
  std::mt19937 rng(11);
  const std::vector<std::string> alphabet{"п", "р", "и", "в", "е", "т", "ї", "a", "b"};
  std::vector<std::string> train;
  for (int i = 0; i < 200; ++i) train.push_back(random_sentence(rng, alphabet));
  BpeSegmenter seg(learn_bpe(corpus(train), 150));
  for (int i = 0; i < 500; ++i) {
    const auto s = random_sentence(rng, alphabet);
    EXPECT_EQ(restore_bpe(seg.apply(s)), s);
  }
}

TEST(BpeCodesFile, SaveLoad) {
  auto codes = learn_bpe(corpus({"привет мир", "при мир"}), 6);
  const auto path = std::filesystem::temp_directory_path() / "varmt_codes_test.txt";
  save_bpe_codes(path, codes);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "#version: varmt-bpe-1");
  EXPECT_EQ(load_bpe_codes(path).merges, codes.merges);
}

TEST(BpeCodesFile, RejectsMissingHeader) {
  const auto path = std::filesystem::temp_directory_path() / "varmt_codes_bad.txt";
  std::ofstream(path) << "a b\n";
  EXPECT_THROW(load_bpe_codes(path), FormatError);
}

TEST(ExtractNgrams, AllSubstringsOfWrappedWord) {
  auto grams = extract_ngrams(SubwordToken{"cat", false}, 3, 6);
  std::set<std::string> got(grams.begin(), grams.end());
  EXPECT_EQ(got, (std::set<std::string>{"<ca", "<cat", "<cat>", "cat", "cat>", "at>"}));
  EXPECT_EQ(grams.size(), 6u);
}

TEST(ExtractNgrams, MarkerExcluded) {
  EXPECT_EQ(extract_ngrams(SubwordToken{"при@@", true}, 3, 6),
            extract_ngrams(SubwordToken{"при", false}, 3, 6));
  // Unicode scalar lengths: "<при>" has 5 characters, so 3..6 gives 3+2+1 grams.
  EXPECT_EQ(extract_ngrams(SubwordToken{"при", false}, 3, 6).size(), 6u);
}

TEST(ExtractNgrams, ShortTokenOnlyWrapped) {
  EXPECT_EQ(extract_ngrams(SubwordToken{"a", false}, 3, 6), (std::vector<std::string>{"<a>"}));
}

TEST(ExtractNgrams, Errors) {
  EXPECT_THROW(extract_ngrams(SubwordToken{"@@", false}, 3, 6), Error);
  EXPECT_THROW(extract_ngrams(SubwordToken{"abc", false}, 0, 6), Error);
  EXPECT_THROW(extract_ngrams(SubwordToken{"abc", false}, 4, 3), Error);
}

TEST(ExtractNgrams, NeverContainsMarkerProperty) {
  std::mt19937 rng(5);
  const std::vector<std::string> alphabet{"@", "a", "б", "c"};
  for (int i = 0; i < 300; ++i) {
    std::string w;
    for (int k = 0; k < 1 + static_cast<int>(rng() % 6); ++k) w += alphabet[rng() % 4];
    if (w.find("@@") != std::string::npos) continue;
    const auto tok = make_token(w + "@@");
    for (const auto& g : extract_ngrams(tok, 3, 6)) EXPECT_EQ(g.find("@@"), std::string::npos);
  }
}

TEST(VocabularyTest, SpecialsAndEncode) {
  auto v = Vocabulary::build({{"a", "b"}, {"b", "c"}}, 1);
  EXPECT_TRUE(v.has_specials());
  EXPECT_EQ(v.size(), 6u);
  EXPECT_EQ(v.encode({"a", "zz"}, true), (std::vector<TokenId>{3, Vocabulary::kUnkId}));
  EXPECT_THROW(v.encode({"zz"}, false), Error);
  auto v2 = Vocabulary::build({{"a", "b"}, {"b", "c"}}, 2);
  EXPECT_EQ(v2.size(), 4u);
}

TEST(Utf8, SplitChars) {
  EXPECT_EQ(utf8::split_chars("aї€"), (std::vector<std::string>{"a", "ї", "€"}));
  EXPECT_EQ(utf8::length("бачити"), 6u);
}
