#include "varmt/pipeline/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "varmt/common/error.hpp"
#include "varmt/common/files.hpp"
#include "varmt/common/utf8.hpp"

namespace varmt {

void SyntheticVarietySpec::validate() const {
  std::set<std::string> from, to;
  for (const auto& r : char_rules) {
    if (utf8::length(r.from) != 1 || r.to.empty())
      throw Error("variety spec: character rule '" + r.from + "' must map one character to a non-empty string");
    if (!from.insert(r.from).second) throw Error("variety spec: duplicate character rule for " + r.from);
    if (!to.insert(r.to).second) throw Error("variety spec: two character rules produce " + r.to);
    if (r.probability < 0 || r.probability > 1) throw Error("variety spec: probability outside [0,1]");
  }
  from.clear();
  for (const auto& r : lexical_rules) {
    if (r.from.empty() || r.to.empty()) throw Error("variety spec: empty lexical rule");
    if (!from.insert(r.from).second) throw Error("variety spec: duplicate lexical rule for " + r.from);
    if (r.probability < 0 || r.probability > 1) throw Error("variety spec: probability outside [0,1]");
  }
}

SyntheticVarietySpec invert(const SyntheticVarietySpec& spec) {
  SyntheticVarietySpec inv;
  for (const auto& r : spec.char_rules) inv.char_rules.push_back({r.to, r.from, r.probability});
  for (const auto& r : spec.lexical_rules) inv.lexical_rules.push_back({r.to, r.from, r.probability});
  return inv;
}

namespace {

bool fires(double p, std::mt19937_64& rng) {
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

// Character rules may have multi-character sources after inversion, so
// match greedily at each position, longest source first.
std::string apply_chars(const std::vector<SubstitutionRule>& rules, const std::string& word,
                        std::mt19937_64& rng) {
  if (rules.empty()) return word;
  std::vector<const SubstitutionRule*> order;
  for (const auto& r : rules) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(),
                   [](auto* a, auto* b) { return a->from.size() > b->from.size(); });
  std::string out;
  std::size_t i = 0;
  while (i < word.size()) {
    const SubstitutionRule* hit = nullptr;
    for (auto* r : order)
      if (word.compare(i, r->from.size(), r->from) == 0) {
        hit = r;
        break;
      }
    if (hit && fires(hit->probability, rng)) {
      out += hit->to;
      i += hit->from.size();
    } else {
      const std::size_t len = hit ? hit->from.size() : utf8::split_chars(word.substr(i, 4)).front().size();
      out.append(word, i, len);
      i += len;
    }
  }
  return out;
}

}  // namespace

std::string apply_variety_word(const SyntheticVarietySpec& spec, const std::string& word,
                               std::mt19937_64& rng) {
  for (const auto& r : spec.lexical_rules)
    if (r.from == word) {
      if (fires(r.probability, rng)) return r.to;
      break;
    }
  return apply_chars(spec.char_rules, word, rng);
}

SyntheticVariety generate_synthetic_pair(const SyntheticVarietySpec& spec, const MonoCorpus& std_corpus,
                                         std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  SyntheticVariety out;
  out.tgt.language_tag = "tgt";
  for (const auto& s : std_corpus.sentences) {
    std::string line;
    for (const auto& w : utf8::split_words(s)) {
      auto v = apply_variety_word(spec, w, rng);
      if (!line.empty()) line += ' ';
      line += v;
      out.gold[w] = std::move(v);
    }
    out.tgt.sentences.push_back(std::move(line));
  }
  return out;
}

double vocabulary_overlap(const MonoCorpus& std_corpus, const MonoCorpus& tgt_corpus) {
  std::unordered_set<std::string> vs, vt;
  for (const auto& s : std_corpus.sentences)
    for (auto& w : utf8::split_words(s)) vs.insert(std::move(w));
  for (const auto& s : tgt_corpus.sentences)
    for (auto& w : utf8::split_words(s)) vt.insert(std::move(w));
  if (vt.empty()) throw Error("vocabulary_overlap: empty tgt corpus");
  std::size_t shared = 0;
  for (const auto& w : vt) shared += vs.count(w);
  return static_cast<double>(shared) / static_cast<double>(vt.size());
}

namespace {

const std::vector<std::pair<std::string, int>> kConsonants{
    {"б", 5}, {"в", 6}, {"г", 4}, {"д", 6}, {"ж", 2}, {"з", 4}, {"к", 7}, {"л", 7}, {"м", 6}, {"н", 7},
    {"п", 5}, {"р", 7}, {"с", 7}, {"т", 7}, {"ф", 1}, {"х", 2}, {"ц", 2}, {"ч", 3}, {"ш", 3}, {"щ", 3}};
const std::vector<std::pair<std::string, int>> kVowels{{"а", 12}, {"е", 10}, {"и", 10}, {"о", 12},
                                                       {"у", 7},  {"ы", 4},  {"э", 3},  {"ю", 3},
                                                       {"я", 4},  {"ё", 3}};
const std::vector<std::pair<std::string, int>> kVariantVowels{{"а", 3}, {"о", 3}, {"у", 2},
                                                              {"і", 3}, {"є", 1}, {"ї", 1}};

const std::unordered_map<std::string, std::string> kTranslit{
    {"а", "a"},  {"б", "b"},  {"в", "v"},  {"г", "g"},  {"д", "d"},    {"е", "e"},  {"ж", "zh"},
    {"з", "z"},  {"и", "i"},  {"к", "k"},  {"л", "l"},  {"м", "m"},    {"н", "n"},  {"о", "o"},
    {"п", "p"},  {"р", "r"},  {"с", "s"},  {"т", "t"},  {"у", "u"},    {"ф", "f"},  {"х", "kh"},
    {"ц", "ts"}, {"ч", "ch"}, {"ш", "sh"}, {"щ", "shch"}, {"ы", "y"},  {"э", "eh"}, {"ю", "yu"},
    {"я", "ya"}, {"ё", "yo"}, {"ъ", ""}};

std::string pick(const std::vector<std::pair<std::string, int>>& table, std::mt19937_64& rng) {
  std::vector<int> w;
  for (const auto& [_, x] : table) w.push_back(x);
  return table[std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng)].first;
}

std::string invent_stem(const std::vector<std::pair<std::string, int>>& vowels, int min_syl, int max_syl,
                        std::mt19937_64& rng) {
  const int n = std::uniform_int_distribution<int>(min_syl, max_syl)(rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::string s;
  for (int i = 0; i < n; ++i) {
    s += pick(kConsonants, rng);
    if (&vowels == &kVowels && i > 0 && u(rng) < 0.04) s += "ъ";
    s += pick(vowels, rng);
    if (u(rng) < 0.3) s += pick(kConsonants, rng);
  }
  return s;
}

std::string transliterate(const std::string& word) {
  std::string out;
  for (const auto& c : utf8::split_chars(word)) {
    auto it = kTranslit.find(c);
    out += it == kTranslit.end() ? c : it->second;
  }
  return out;
}

struct Lemma {
  std::string std_stem;
  std::string src_stem;
  std::size_t topic;
  // Collocates (indices into the adjective, verb and noun lists) that make
  // each word's contexts its own.
  std::vector<std::size_t> adjectives, verbs, objects;
};

struct Phrase {
  std::string std;
  std::string src;
};

class ToyLanguage {
 public:
  ToyLanguage(const FixtureConfig& c, std::mt19937_64& rng) : topics_(c.topics) {
    std::set<std::string> used_std, used_src;
    for (const auto& [s, t] : kFunction) {
      used_std.insert(s);
      used_src.insert(t);
    }
    auto make = [&](std::size_t n, int lo, int hi) {
      std::vector<Lemma> out;
      while (out.size() < n) {
        auto s = invent_stem(kVowels, lo, hi, rng);
        auto t = transliterate(s);
        if (utf8::length(s) < 2 || !used_std.insert(s).second) continue;
        if (!used_src.insert(t).second) {
          used_std.erase(s);
          continue;
        }
        out.push_back({s, t, out.size() % topics_, {}, {}, {}});
      }
      return out;
    };
    nouns_ = make(c.nouns, 1, 3);
    verbs_ = make(c.verbs, 1, 2);
    adjectives_ = make(c.adjectives, 1, 2);
    auto partners = [&](const std::vector<Lemma>& pool, std::size_t topic, std::size_t k) {
      std::vector<std::size_t> same;
      for (std::size_t i = 0; i < pool.size(); ++i)
        if (pool[i].topic == topic) same.push_back(i);
      std::shuffle(same.begin(), same.end(), rng);
      same.resize(std::min(k, same.size()));
      return same;
    };
    for (auto& n : nouns_) {
      n.adjectives = partners(adjectives_, n.topic, 3);
      n.verbs = partners(verbs_, n.topic, 3);
    }
    for (auto& v : verbs_) v.objects = partners(nouns_, v.topic, 4);
  }

  Phrase sentence(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t topic = std::uniform_int_distribution<std::size_t>(0, topics_ - 1)(rng);
    Phrase p = clause(topic, rng);
    if (u(rng) < 0.15) {
      const Phrase q = clause(topic, rng);
      p.std += " и " + q.std;
      p.src += " et " + q.src;
    }
    return p;
  }

 private:
  static inline const std::vector<std::pair<std::string, std::string>> kFunction{
      {"в", "in"}, {"на", "na"}, {"с", "kon"}, {"по", "po"}, {"за", "per"}, {"от", "ab"},
      {"к", "ad"}, {"и", "et"},  {"не", "nai"}};
  static inline const std::set<std::string> kVowelSet{"а", "е", "и", "о", "у", "ы", "э", "ю", "я", "ё"};

  // Zipf over the topic's words (pool order), or over the whole pool.
  std::size_t draw(const std::vector<Lemma>& pool, std::size_t topic, std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const bool local = u(rng) < 0.85;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (!local || pool[i].topic == topic) idx.push_back(i);
    std::vector<double> w;
    for (std::size_t r = 0; r < idx.size(); ++r) w.push_back(1.0 / static_cast<double>(r + 1));
    return idx[std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng)];
  }

  // A collocate with probability 0.8 when there is one.
  std::size_t draw_from(const std::vector<std::size_t>& preferred, const std::vector<Lemma>& pool,
                        std::size_t topic, std::mt19937_64& rng) const {
    if (!preferred.empty() && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.8)
      return preferred[std::uniform_int_distribution<std::size_t>(0, preferred.size() - 1)(rng)];
    return draw(pool, topic, rng);
  }

  // NP: std "A N", src "N A". Plural nouns take ы after a consonant and и
  // after a vowel (src: s); adjectives agree with ый|ие.
  Phrase noun_phrase(std::size_t noun, bool plural, std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Lemma& n = nouns_[noun];
    std::string suffix;
    if (plural) suffix = kVowelSet.count(utf8::split_chars(n.std_stem).back()) ? "и" : "ы";
    Phrase p{n.std_stem + suffix, n.src_stem + (plural ? "s" : "")};
    if (u(rng) < 0.4) {
      const Lemma& a = adjectives_[draw_from(n.adjectives, adjectives_, n.topic, rng)];
      p.std = a.std_stem + (plural ? "ие" : "ый") + " " + p.std;
      p.src = p.src + " " + a.src_stem;
    }
    return p;
  }

  Phrase clause(std::size_t topic, std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const bool plural = u(rng) < 0.3;
    const std::size_t subject = draw(nouns_, topic, rng);
    Phrase p = noun_phrase(subject, plural, rng);
    const std::size_t verb = draw_from(nouns_[subject].verbs, verbs_, topic, rng);
    const Lemma& v = verbs_[verb];
    if (u(rng) < 0.15) {
      p.std += " не";
      p.src += " nai";
    }
    p.std += " " + v.std_stem + (plural ? "ют" : "ет");
    p.src += " " + v.src_stem + (plural ? "an" : "a");
    if (u(rng) < 0.7) {
      const Phrase o = noun_phrase(draw_from(v.objects, nouns_, topic, rng), u(rng) < 0.3, rng);
      p.std += " " + o.std;
      p.src += " " + o.src;
    }
    if (u(rng) < 0.4) {
      const auto& [ps, pt] = kFunction[std::uniform_int_distribution<std::size_t>(0, 6)(rng)];
      const Phrase o = noun_phrase(draw(nouns_, topic, rng), u(rng) < 0.3, rng);
      p.std += " " + ps + " " + o.std;
      p.src += " " + pt + " " + o.src;
    }
    return p;
  }

  std::size_t topics_;
  std::vector<Lemma> nouns_, verbs_, adjectives_;
};

}  // namespace

SyntheticVarietySpec default_variety_spec(const MonoCorpus& std_corpus, std::size_t lexical,
                                          std::uint64_t seed) {
  SyntheticVarietySpec spec;
  spec.char_rules = {{"ы", "і", 1.0}, {"э", "є", 1.0}, {"ё", "ї", 1.0}, {"ъ", "ґ", 1.0}, {"щ", "ў", 1.0}};
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& s : std_corpus.sentences)
    for (auto& w : utf8::split_words(s)) ++counts[w];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  // Variants must not collide with any std word or its character-rule image.
  std::set<std::string> taken;
  std::mt19937_64 dummy(0);
  for (const auto& [w, _] : ranked) {
    taken.insert(w);
    taken.insert(apply_chars(spec.char_rules, w, dummy));
  }
  std::mt19937_64 rng(seed);
  for (const auto& [w, _] : ranked) {
    if (spec.lexical_rules.size() >= lexical) break;
    if (utf8::length(w) < 3) continue;
    std::string v;
    do v = invent_stem(kVariantVowels, 2, 3, rng);
    while (!taken.insert(v).second);
    spec.lexical_rules.push_back({w, v, 1.0});
  }
  return spec;
}

void save_variety_spec(const std::filesystem::path& path, const SyntheticVarietySpec& spec) {
  std::vector<std::string> lines;
  auto emit = [&](const char* kind, const SubstitutionRule& r) {
    std::ostringstream os;
    os << kind << '\t' << r.from << '\t' << r.to << '\t' << r.probability;
    lines.push_back(os.str());
  };
  for (const auto& r : spec.char_rules) emit("char", r);
  for (const auto& r : spec.lexical_rules) emit("word", r);
  files::write_lines(path, lines);
}

SyntheticVarietySpec load_variety_spec(const std::filesystem::path& path) {
  SyntheticVarietySpec spec;
  std::size_t lineno = 0;
  for (const auto& line : files::read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream is(line);
    for (std::string x; std::getline(is, x, '\t');) f.push_back(x);
    if (f.size() != 4 || (f[0] != "char" && f[0] != "word"))
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected kind<TAB>from<TAB>to<TAB>p");
    SubstitutionRule r{f[1], f[2], std::stod(f[3])};
    (f[0] == "char" ? spec.char_rules : spec.lexical_rules).push_back(std::move(r));
  }
  spec.validate();
  return spec;
}

SyntheticFixture make_fixture(const FixtureConfig& c) {
  if (c.train_pairs == 0 || c.tgt_mono == 0 || c.test_pairs == 0 || c.topics == 0)
    throw Error("make_fixture: sizes must be positive");
  std::mt19937_64 rng(c.seed);
  const ToyLanguage lang(c, rng);
  auto sample = [&](std::size_t n) {
    std::vector<Phrase> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(lang.sentence(rng));
    return out;
  };
  auto to_parallel = [](const std::vector<Phrase>& ps) {
    ParallelCorpus pc;
    for (const auto& p : ps) pc.pairs.emplace_back(p.src, p.std);
    return pc;
  };
  SyntheticFixture f;
  const auto train = sample(c.train_pairs), dev = sample(c.dev_pairs), extra = sample(c.std_mono_extra),
             mono = sample(c.tgt_mono), test = sample(c.test_pairs);
  f.train = to_parallel(train);
  f.dev = to_parallel(dev);
  f.std_mono.language_tag = "std";
  for (const auto* part : {&train, &extra})
    for (const auto& p : *part) f.std_mono.sentences.push_back(p.std);
  f.spec = default_variety_spec(f.std_mono, c.lexical_rules, c.seed);

  MonoCorpus mono_std{{}, "std"};
  f.tgt_mono_src.language_tag = "src";
  for (const auto& p : mono) {
    mono_std.sentences.push_back(p.std);
    f.tgt_mono_src.sentences.push_back(p.src);
  }
  f.tgt_mono = generate_synthetic_pair(f.spec, mono_std, c.seed + 1).tgt;

  f.test_std.language_tag = "std";
  for (const auto& p : test) f.test_std.sentences.push_back(p.std);
  const auto test_tgt = generate_synthetic_pair(f.spec, f.test_std, c.seed + 2).tgt;
  for (std::size_t i = 0; i < test.size(); ++i) f.test.pairs.emplace_back(test[i].src, test_tgt.sentences[i]);
  return f;
}

void write_fixture(const std::filesystem::path& dir, const SyntheticFixture& f) {
  std::filesystem::create_directories(dir);
  write_parallel(dir / "train.src", dir / "train.std", f.train);
  write_parallel(dir / "dev.src", dir / "dev.std", f.dev);
  write_mono_corpus(dir / "std.mono", f.std_mono);
  write_mono_corpus(dir / "tgt.mono", f.tgt_mono);
  write_mono_corpus(dir / "tgt.mono.src", f.tgt_mono_src);
  write_parallel(dir / "test.src", dir / "test.tgt", f.test);
  write_mono_corpus(dir / "test.std", f.test_std);
  save_variety_spec(dir / "variety.tsv", f.spec);
}

}  // namespace varmt
