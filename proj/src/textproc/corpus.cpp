#include "varmt/textproc/corpus.hpp"

#include "varmt/common/error.hpp"
#include "varmt/common/files.hpp"
#include "varmt/common/utf8.hpp"

namespace varmt {

MonoCorpus read_mono_corpus(const std::filesystem::path& path, std::string language_tag) {
  return MonoCorpus{files::read_lines(path), std::move(language_tag)};
}

void write_mono_corpus(const std::filesystem::path& path, const MonoCorpus& corpus) {
  files::write_lines(path, corpus.sentences);
}

TokenizedCorpus read_tokenized(const std::filesystem::path& path) {
  TokenizedCorpus out;
  for (const auto& line : files::read_lines(path)) out.push_back(utf8::split_words(line));
  return out;
}

void write_tokenized(const std::filesystem::path& path, const TokenizedCorpus& corpus) {
  std::vector<std::string> lines;
  lines.reserve(corpus.size());
  for (const auto& s : corpus) lines.push_back(utf8::join(s, " "));
  files::write_lines(path, lines);
}

ParallelCorpus read_parallel(const std::filesystem::path& src, const std::filesystem::path& tgt,
                             Origin origin) {
  const auto a = files::read_lines(src);
  const auto b = files::read_lines(tgt);
  if (a.size() != b.size())
    throw Error("parallel files differ in length: " + src.string() + " (" +
                std::to_string(a.size()) + ") vs " + tgt.string() + " (" +
                std::to_string(b.size()) + ")");
  ParallelCorpus out;
  out.origin = origin;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (utf8::split_words(a[i]).empty() || utf8::split_words(b[i]).empty())
      throw Error(src.string() + ":" + std::to_string(i + 1) + ": empty side in parallel pair");
    out.pairs.emplace_back(a[i], b[i]);
  }
  return out;
}

void write_parallel(const std::filesystem::path& src, const std::filesystem::path& tgt,
                    const ParallelCorpus& corpus) {
  std::vector<std::string> a, b;
  for (const auto& [s, t] : corpus.pairs) {
    a.push_back(s);
    b.push_back(t);
  }
  files::write_lines(src, a);
  files::write_lines(tgt, b);
}

TokenizedParallel read_tokenized_parallel(const std::filesystem::path& src,
                                          const std::filesystem::path& tgt) {
  const auto a = read_tokenized(src);
  const auto b = read_tokenized(tgt);
  if (a.size() != b.size()) throw Error("tokenized parallel files differ in length");
  TokenizedParallel out;
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back({a[i], b[i]});
  return out;
}

}  // namespace varmt
