#pragma once

#include <functional>
#include <string>
#include <vector>

#include "varmt/mt/model.hpp"

namespace varmt::mt {

struct Hypothesis {
  std::vector<TokenId> tokens;  // without </s>
  /// Sum of log-probabilities divided by the number of decoding steps
  /// (softmax), or 0 for continuous decoding.
  double score = 0.0;
  /// max_len steps passed without </s>.
  bool truncated = false;
};

/// Log-probabilities of the next token after `prefix` (prefix excludes the
/// initial </s>).
using NextLogProbs = std::function<Eigen::VectorXd(const std::vector<TokenId>& prefix)>;

/// Length-normalized beam search. Each step keeps the `beam` best
/// candidates by cumulative log-probability; candidates ending in `eos` are
/// finished. Search stops once `beam` hypotheses finished, none are alive,
/// or max_len steps were taken (live hypotheses then count as truncated).
/// The result maximizes cumulative log-probability / steps. Banned ids are
/// never emitted. beam = 1 is greedy argmax decoding.
Hypothesis beam_search(const NextLogProbs& next, std::size_t beam, std::size_t max_len, TokenId eos,
                       const std::vector<TokenId>& banned = {});

/// Predicted vector after feeding `prev`.
using NextVector = std::function<RowVector(TokenId prev)>;

/// Continuous decoding: each predicted vector is matched to its
/// cosine-nearest row of `table` (unit rows; ties to the lower id) and the
/// matched token is fed back. Starts from `eos`.
Hypothesis greedy_continuous(const NextVector& next, const Matrix& table, TokenId eos,
                             std::size_t max_len, const std::vector<TokenId>& banned = {});

/// Ids never emitted by the models: <pad> and <unk>.
std::vector<TokenId> banned_outputs();

Hypothesis translate_greedy(const Seq2SeqModel& model, const std::vector<TokenId>& src);
Hypothesis translate_beam(const Seq2SeqModel& model, const std::vector<TokenId>& src,
                          std::size_t beam);

struct Translation {
  std::vector<std::string> tokens;
  bool truncated = false;
};

/// Token-level front end: continuous head decodes greedily, softmax head
/// with beam search. Unknown source tokens map to <unk> when `allow_unk`.
Translation translate(const Seq2SeqModel& model, const std::vector<std::string>& src,
                      std::size_t beam = 5, bool allow_unk = false);

/// translate() over many sentences; `threads` > 1 splits them into
/// contiguous chunks, output order matches input order. Empty sentences
/// give empty translations.
std::vector<Translation> translate_all(const Seq2SeqModel& model,
                                       const std::vector<std::vector<std::string>>& sentences,
                                       std::size_t beam = 5, bool allow_unk = false,
                                       std::size_t threads = 1);

}  // namespace varmt::mt
