#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "varmt/embed/embedding_model.hpp"
#include "varmt/mt/autograd.hpp"
#include "varmt/textproc/vocabulary.hpp"

namespace varmt::mt {

enum class HeadKind { continuous, softmax };

std::string to_string(HeadKind kind);
HeadKind parse_head_kind(const std::string& s);

struct ModelConfig {
  std::size_t d_model = 128;
  std::size_t num_layers_enc = 2;
  std::size_t num_layers_dec = 2;
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 256;
  double dropout_rate = 0.1;
  /// Width of the pretrained target vectors; 0 means "take it from the
  /// embedding model" when building a continuous-head model.
  std::size_t embed_dim = 0;
  HeadKind head_kind = HeadKind::continuous;
  std::size_t max_len = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

struct LinearParams {
  Param w;
  Param b;
};

struct LayerNormParams {
  Param gain;
  Param bias;
};

struct AttentionParams {
  LinearParams q, k, v, o;
};

struct EncoderLayer {
  LayerNormParams norm_attn, norm_ffn;
  AttentionParams self_attn;
  LinearParams ffn_in, ffn_out;
};

struct DecoderLayer {
  LayerNormParams norm_self, norm_cross, norm_ffn;
  AttentionParams self_attn, cross_attn;
  LinearParams ffn_in, ffn_out;
};

/// Pre-norm transformer encoder-decoder. With the continuous head the
/// decoder reads and predicts frozen pretrained target vectors; with the
/// softmax head it has a trainable target embedding and a logits layer.
struct Seq2SeqModel {
  ModelConfig config;
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;

  Param src_embedding;
  Param tgt_embedding;            // softmax head
  LinearParams input_projection;  // continuous head: embed_dim -> d_model
  Matrix decoder_input_table;     // continuous head, frozen
  Matrix output_table;            // continuous head, frozen

  std::vector<EncoderLayer> encoder;
  std::vector<DecoderLayer> decoder;
  LayerNormParams encoder_norm;
  LayerNormParams decoder_norm;
  LinearParams output_head;  // d_model -> embed_dim, or d_model -> |tgt vocab|

  bool continuous() const { return config.head_kind == HeadKind::continuous; }

  /// Trainable parameters in a fixed order. Frozen tables are not included.
  std::vector<Param*> parameters();
  std::vector<const Param*> parameters() const;
  std::size_t num_parameters() const;
};

/// Continuous-head model whose target vocabulary is the embedding
/// vocabulary (after the reserved <pad>, <unk>, </s>).
Seq2SeqModel build_model(const ModelConfig& config, const Vocabulary& src_vocab,
                         const EmbeddingModel& tgt_embedding);

/// Softmax-head model over an explicit target vocabulary.
Seq2SeqModel build_softmax_model(const ModelConfig& config, const Vocabulary& src_vocab,
                                 const Vocabulary& tgt_vocab);

/// Correctly shaped model with the given vocabularies; values are
/// initialized as in build_model and frozen tables are zero. Used when
/// loading checkpoints.
Seq2SeqModel allocate_model(const ModelConfig& config, const Vocabulary& src_vocab,
                            const Vocabulary& tgt_vocab);

/// Vocabulary and unit-norm table for a finalized embedding model. Rows of
/// the reserved tokens are fixed seeded unit vectors shared by every model.
struct TargetTable {
  Vocabulary vocab;
  Matrix vectors;
};
TargetTable target_table(const EmbeddingModel& embedding);

/// Sentence pair as ids, without the end-of-sentence token.
struct EncodedPair {
  std::vector<TokenId> src;
  std::vector<TokenId> tgt;
};

/// Packed teacher-forcing batch. Source sequences get </s> appended; the
/// decoder input is </s> followed by the target, the output is the target
/// followed by </s>.
struct Batch {
  std::vector<TokenId> src_ids;
  std::vector<Eigen::Index> src_positions;
  std::vector<Segment> src_self;
  std::vector<TokenId> tgt_in;
  std::vector<TokenId> tgt_out;
  std::vector<Eigen::Index> tgt_positions;
  std::vector<Segment> tgt_self;
  std::vector<Segment> cross;
  std::size_t sentences = 0;
};
Batch make_batch(const std::vector<const EncodedPair*>& pairs);

/// Graph of the whole network for a batch; returns the head output node
/// (predicted vectors or logits, one row per target position). `rng` may be
/// null when dropout is off.
Graph::Id forward(Graph& g, Seq2SeqModel& model, const Batch& batch, double dropout,
                  std::mt19937_64* rng);

/// Loss options used by training.
struct LossOptions {
  vmf::VmfOptions vmf{0.02, 1.0};
  double label_smoothing = 0.1;
};

/// Forward plus the head's loss; returns the scalar loss node.
Graph::Id loss_node(Graph& g, Seq2SeqModel& model, const Batch& batch, const LossOptions& opts,
                    double dropout, std::mt19937_64* rng);

/// Sentence-level helpers for decoding without the tape.
struct EncoderMemory {
  Matrix memory;
  std::vector<Matrix> cross_k;
  std::vector<Matrix> cross_v;
};
EncoderMemory encode_source(const Seq2SeqModel& model, const std::vector<TokenId>& src);

struct DecoderCache {
  std::vector<Matrix> self_k;
  std::vector<Matrix> self_v;
  Eigen::Index steps = 0;
};
DecoderCache empty_cache(const Seq2SeqModel& model);

/// Advances the decoder by one position fed with `prev` and returns the head
/// output (predicted vector or logits).
RowVector decoder_step(const Seq2SeqModel& model, const EncoderMemory& mem, DecoderCache& cache,
                       TokenId prev);

/// Replaces frozen tables (and the target vocabulary) with those of a new
/// embedding model. Continuous head only.
void swap_target_embeddings(Seq2SeqModel& model, const EmbeddingModel& embedding);

/// Softmax head: moves target-side rows to a new vocabulary by token
/// string; rows of unseen tokens are freshly initialized from `seed`.
void remap_target_vocabulary(Seq2SeqModel& model, const Vocabulary& vocab, std::uint64_t seed);

}  // namespace varmt::mt
