#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "varmt/common/error.hpp"
#include "varmt/eval/bleu.hpp"
#include "varmt/eval/rare_words.hpp"

using namespace varmt;

// Expected values are hand-computed n-gram tables, cross-checked against a
// run of sacreBLEU 2.x (tokenize=13a, smooth_method=none).

TEST(Tokenize13a, MatchesReferenceRules) {
  EXPECT_EQ(tokenize_13a("Hello, world! It's 3.5 degrees."), "Hello , world ! It's 3.5 degrees .");
  EXPECT_EQ(tokenize_13a("x-ray 1-2 &amp; a.b,c 1,000.5 (test) [x] {y} ~z` \"q\""),
            "x-ray 1 - 2 & a . b , c 1,000.5 ( test ) [ x ] { y } ~ z ` \" q \"");
  EXPECT_EQ(tokenize_13a("а.б, 5-й"), "а . б , 5 - й");
}

TEST(Bleu, IdentityIsHundred) {
  const std::vector<std::string> s{"the cat sat on the mat", "a b c d e"};
  EXPECT_NEAR(bleu(s, s).score, 100.0, 1e-9);
}

TEST(Bleu, NoFourGramsGivesZero) {
  // precisions 3/3, 2/2, 1/1, 0/0: the 4-gram order is empty -> 0 without smoothing.
  const auto b = bleu({"the cat sat"}, {"the cat sat down"});
  EXPECT_EQ(b.matches, (std::array<std::size_t, 4>{3, 2, 1, 0}));
  EXPECT_EQ(b.totals, (std::array<std::size_t, 4>{3, 2, 1, 0}));
  EXPECT_EQ(b.score, 0.0);
}

TEST(Bleu, HandComputedSingleSubstitution) {
  // 6/7, 4/6, 2/5, 1/4 -> 100 * (0.0571428...)^(1/4)
  const auto b = bleu({"the cat is on the mat ."}, {"the cat sat on the mat ."});
  EXPECT_NEAR(b.score, 48.892302243490086, 1e-9);
  EXPECT_DOUBLE_EQ(b.brevity_penalty, 1.0);
}

TEST(Bleu, BrevityPenaltyClosedForm) {
  const auto b = bleu({"a b c d e f g h i"}, {"a b c d e f g h i j"});
  EXPECT_EQ(b.hyp_len, 9u);
  EXPECT_EQ(b.ref_len, 10u);
  EXPECT_NEAR(b.brevity_penalty, std::exp(1.0 - 10.0 / 9.0), 1e-12);
  EXPECT_NEAR(b.brevity_penalty, 0.8948, 1e-4);
  EXPECT_NEAR(b.score, 89.483931681437, 1e-9);
}

TEST(Bleu, CorpusLevelAggregation) {
  // counts 8/10, 6/8, 4/6, 2/4 summed over both sentences
  const auto b = bleu({"the quick brown fox jumps", "over the lazy dog today"},
                      {"the quick brown fox jumped", "over the lazy dog"});
  EXPECT_NEAR(b.score, 66.87403049764218, 1e-9);
}

TEST(Bleu, PunctuationTokenization) {
  const auto b = bleu({"Hello, world! It's 3.5 degrees.", "x-ray 1-2"},
                      {"Hello, world! It is 3.5 degrees.", "x-ray 1-2 3"});
  EXPECT_EQ(b.matches, (std::array<std::size_t, 4>{11, 8, 5, 2}));
  EXPECT_EQ(b.totals, (std::array<std::size_t, 4>{12, 10, 8, 6}));
  EXPECT_NEAR(b.score, 52.92155949706946, 1e-9);
}

TEST(Bleu, CyrillicText) {
  const auto b = bleu({"привет мир как дела у тебя", "ми ніколи не думаємо про це"},
                      {"привет мир как твои дела у тебя",
                       "ми ніколи не думаємо про прихований зв'язок"});
  EXPECT_NEAR(b.score, 52.92155949706946, 1e-9);
}

TEST(Bleu, ExpSmoothing) {
  const std::vector<std::string> h{"a b c d e f"}, r{"a x c y e z"};
  EXPECT_EQ(bleu(h, r).score, 0.0);
  EXPECT_NEAR(bleu(h, r, BleuSmoothing::exp).score, 10.682175159905853, 1e-9);
}

TEST(Bleu, BoundsAndPermutationInvariance) {
  std::mt19937 rng(4);
  const std::vector<std::string> words{"a", "b", "c", "d", "e", "f"};
  auto sentence = [&] {
    std::string s;
    const int n = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) s += (i ? " " : "") + words[rng() % words.size()];
    return s;
  };
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> h, r;
    for (int i = 0; i < 6; ++i) {
      h.push_back(sentence());
      r.push_back(sentence());
    }
    const double score = bleu(h, r).score;
    EXPECT_GE(score, 0.0);
    EXPECT_LE(score, 100.0);
    std::vector<std::size_t> perm{0, 1, 2, 3, 4, 5};
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::string> hp, rp;
    for (auto i : perm) {
      hp.push_back(h[i]);
      rp.push_back(r[i]);
    }
    EXPECT_DOUBLE_EQ(bleu(hp, rp).score, score);
  }
}

TEST(Bleu, Errors) {
  EXPECT_THROW(bleu({"a"}, {}), Error);
  EXPECT_THROW(bleu({}, {}), Error);
}

TEST(RareWords, IdentityAndEmpty) {
  const std::vector<std::string> refs{"a b c", "a d"};
  FrequencyTable f{{"a", 1}, {"b", 3}, {"c", 50}, {"d", 2}};
  for (const auto& acc : rare_word_accuracy(refs, refs, f, default_frequency_buckets())) {
    if (acc.occurrences) {
      EXPECT_EQ(*acc.accuracy, 1.0);
    }
  }
  for (const auto& acc : rare_word_accuracy({"", ""}, refs, f, default_frequency_buckets())) {
    if (acc.occurrences) {
      EXPECT_EQ(*acc.accuracy, 0.0);
    } else {
      EXPECT_FALSE(acc.accuracy.has_value());
    }
  }
}

TEST(RareWords, HandComputedBuckets) {
  FrequencyTable f{{"a", 1}, {"b", 2}, {"c", 2}, {"d", 3},  {"e", 7},
                   {"f", 7}, {"g", 50}, {"h", 50}, {"i", 500}};
  const auto acc = rare_word_accuracy({"a b x d y", "f f g z i"}, {"a b c d e", "a f g h i"}, f,
                                      default_frequency_buckets());
  ASSERT_EQ(acc.size(), 7u);
  EXPECT_DOUBLE_EQ(*acc[0].accuracy, 0.5);  // a hit, a miss
  EXPECT_DOUBLE_EQ(*acc[1].accuracy, 0.5);  // b hit, c miss
  EXPECT_DOUBLE_EQ(*acc[2].accuracy, 1.0);  // d
  EXPECT_FALSE(acc[3].accuracy.has_value());
  EXPECT_DOUBLE_EQ(*acc[4].accuracy, 0.5);  // e miss, f hit
  EXPECT_DOUBLE_EQ(*acc[5].accuracy, 0.5);  // g hit, h miss
  EXPECT_DOUBLE_EQ(*acc[6].accuracy, 1.0);  // i
}
