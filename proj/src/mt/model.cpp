#include "varmt/mt/model.hpp"

#include <cmath>
#include <map>

#include "varmt/common/error.hpp"

namespace varmt::mt {
namespace {

constexpr std::uint64_t kReservedRowSeed = 0x5eedf00dULL;

Param make_param(std::string name, Eigen::Index rows, Eigen::Index cols) {
  Param p{std::move(name), Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)};
  return p;
}

void glorot(Param& p, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
  std::uniform_real_distribution<double> u(-a, a);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = u(rng);
}

void normal_init(Param& p, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = n(rng);
}

LinearParams make_linear(const std::string& name, std::size_t in, std::size_t out,
                         std::mt19937_64& rng) {
  LinearParams l{make_param(name + ".w", static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out)),
                 make_param(name + ".b", 1, static_cast<Eigen::Index>(out))};
  glorot(l.w, rng);
  return l;
}

LayerNormParams make_norm(const std::string& name, std::size_t d) {
  LayerNormParams n{make_param(name + ".gain", 1, static_cast<Eigen::Index>(d)),
                    make_param(name + ".bias", 1, static_cast<Eigen::Index>(d))};
  n.gain.value.setOnes();
  return n;
}

AttentionParams make_attention(const std::string& name, std::size_t d, std::mt19937_64& rng) {
  return AttentionParams{make_linear(name + ".q", d, d, rng), make_linear(name + ".k", d, d, rng),
                         make_linear(name + ".v", d, d, rng), make_linear(name + ".o", d, d, rng)};
}

void append(std::vector<Param*>& out, LinearParams& l) {
  out.push_back(&l.w);
  out.push_back(&l.b);
}
void append(std::vector<Param*>& out, LayerNormParams& n) {
  out.push_back(&n.gain);
  out.push_back(&n.bias);
}
void append(std::vector<Param*>& out, AttentionParams& a) {
  append(out, a.q);
  append(out, a.k);
  append(out, a.v);
  append(out, a.o);
}

// Sinusoidal rows, grown on demand.
const Matrix& pe_table(Eigen::Index dim, Eigen::Index positions) {
  thread_local std::map<Eigen::Index, Matrix> cache;
  auto& m = cache[dim];
  if (m.rows() < positions) m = positional_encoding(std::max<Eigen::Index>(positions, 256), dim);
  return m;
}

Matrix pe_rows(Eigen::Index dim, const std::vector<Eigen::Index>& positions) {
  Eigen::Index mx = 0;
  for (auto p : positions) mx = std::max(mx, p + 1);
  const Matrix& t = pe_table(dim, mx);
  Matrix out(static_cast<Eigen::Index>(positions.size()), dim);
  for (std::size_t i = 0; i < positions.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = t.row(positions[i]);
  return out;
}

Graph::Id mha(Graph& g, Graph::Id q_in, Graph::Id kv_in, AttentionParams& p,
              const std::vector<Segment>& segments, int heads, bool causal) {
  const auto q = g.linear(q_in, p.q.w, p.q.b);
  const auto k = g.linear(kv_in, p.k.w, p.k.b);
  const auto v = g.linear(kv_in, p.v.w, p.v.b);
  const auto a = g.attention(q, k, v, segments, heads, causal);
  return g.linear(a, p.o.w, p.o.b);
}

Graph::Id ffn(Graph& g, Graph::Id x, LinearParams& in, LinearParams& out) {
  return g.linear(g.relu(g.linear(x, in.w, in.b)), out.w, out.b);
}

Graph::Id encoder_graph(Graph& g, Seq2SeqModel& m, const std::vector<TokenId>& ids,
                        const std::vector<Eigen::Index>& positions, const std::vector<Segment>& segs,
                        double dropout, std::mt19937_64* rng) {
  const auto d = static_cast<Eigen::Index>(m.config.d_model);
  const int heads = static_cast<int>(m.config.num_heads);
  auto drop = [&](Graph::Id x) { return rng ? g.dropout(x, dropout, *rng) : x; };
  auto x = g.gather(m.src_embedding, ids, std::sqrt(static_cast<double>(d)));
  x = drop(g.add_constant(x, pe_rows(d, positions)));
  for (auto& layer : m.encoder) {
    auto h = g.layer_norm(x, layer.norm_attn.gain, layer.norm_attn.bias);
    x = g.add(x, drop(mha(g, h, h, layer.self_attn, segs, heads, false)));
    h = g.layer_norm(x, layer.norm_ffn.gain, layer.norm_ffn.bias);
    x = g.add(x, drop(ffn(g, h, layer.ffn_in, layer.ffn_out)));
  }
  return g.layer_norm(x, m.encoder_norm.gain, m.encoder_norm.bias);
}

// Plain (tape-free) helpers for incremental decoding.
Matrix plain_linear(const Matrix& x, const LinearParams& p) {
  Matrix y = x * p.w.value;
  y.rowwise() += p.b.value.row(0);
  return y;
}

Matrix plain_norm(const Matrix& x, const LayerNormParams& p, double eps = 1e-5) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    y.row(i) = ((x.row(i).array() - mu) / std::sqrt(var + eps)) * p.gain.value.row(0).array() +
               p.bias.value.row(0).array();
  }
  return y;
}

Matrix plain_attention(const Matrix& q, const Matrix& k, const Matrix& v, int heads) {
  const Eigen::Index d = q.cols(), dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Matrix out(q.rows(), d);
  for (int h = 0; h < heads; ++h) {
    Matrix s = (q.middleCols(h * dk, dk) * k.middleCols(h * dk, dk).transpose()) * scale;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      const double mx = s.row(i).maxCoeff();
      s.row(i) = (s.row(i).array() - mx).exp();
      s.row(i) /= s.row(i).sum();
    }
    out.middleCols(h * dk, dk) = s * v.middleCols(h * dk, dk);
  }
  return out;
}

void append_row(Matrix& m, const Matrix& row) {
  m.conservativeResize(m.rows() + 1, row.cols());
  m.row(m.rows() - 1) = row.row(0);
}

Matrix reserved_rows(std::size_t dim) {
  std::mt19937_64 rng(kReservedRowSeed + dim);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix r(Vocabulary::kNumSpecials, static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = n(rng);
  r.rowwise().normalize();
  return r;
}

Seq2SeqModel skeleton(const ModelConfig& config, const Vocabulary& src_vocab, std::mt19937_64& rng) {
  config.validate();
  require(src_vocab.has_specials(), "source vocabulary must start with the reserved tokens");
  Seq2SeqModel m;
  m.config = config;
  m.src_vocab = src_vocab;
  const std::size_t d = config.d_model;
  m.src_embedding = make_param("src_embedding", static_cast<Eigen::Index>(src_vocab.size()),
                               static_cast<Eigen::Index>(d));
  normal_init(m.src_embedding, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  for (std::size_t l = 0; l < config.num_layers_enc; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    EncoderLayer layer{make_norm(p + ".norm_attn", d), make_norm(p + ".norm_ffn", d),
                       make_attention(p + ".self_attn", d, rng),
                       make_linear(p + ".ffn_in", d, config.ffn_dim, rng),
                       make_linear(p + ".ffn_out", config.ffn_dim, d, rng)};
    m.encoder.push_back(std::move(layer));
  }
  for (std::size_t l = 0; l < config.num_layers_dec; ++l) {
    const std::string p = "decoder." + std::to_string(l);
    DecoderLayer layer{make_norm(p + ".norm_self", d), make_norm(p + ".norm_cross", d),
                       make_norm(p + ".norm_ffn", d), make_attention(p + ".self_attn", d, rng),
                       make_attention(p + ".cross_attn", d, rng),
                       make_linear(p + ".ffn_in", d, config.ffn_dim, rng),
                       make_linear(p + ".ffn_out", config.ffn_dim, d, rng)};
    m.decoder.push_back(std::move(layer));
  }
  m.encoder_norm = make_norm("encoder_norm", d);
  m.decoder_norm = make_norm("decoder_norm", d);
  return m;
}

}  // namespace

std::string to_string(HeadKind kind) { return kind == HeadKind::continuous ? "continuous" : "softmax"; }

HeadKind parse_head_kind(const std::string& s) {
  if (s == "continuous") return HeadKind::continuous;
  if (s == "softmax") return HeadKind::softmax;
  throw Error("unknown head kind '" + s + "' (expected continuous or softmax)");
}

void ModelConfig::validate() const {
  require(d_model > 0 && num_heads > 0 && ffn_dim > 0 && max_len > 0,
          "model dimensions must be positive");
  require(num_layers_enc > 0 && num_layers_dec > 0, "model needs at least one layer per side");
  require(d_model % num_heads == 0, "d_model must be divisible by num_heads");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout_rate must be in [0, 1)");
}

std::vector<Param*> Seq2SeqModel::parameters() {
  std::vector<Param*> out{&src_embedding};
  if (continuous())
    append(out, input_projection);
  else
    out.push_back(&tgt_embedding);
  for (auto& l : encoder) {
    append(out, l.norm_attn);
    append(out, l.self_attn);
    append(out, l.norm_ffn);
    append(out, l.ffn_in);
    append(out, l.ffn_out);
  }
  append(out, encoder_norm);
  for (auto& l : decoder) {
    append(out, l.norm_self);
    append(out, l.self_attn);
    append(out, l.norm_cross);
    append(out, l.cross_attn);
    append(out, l.norm_ffn);
    append(out, l.ffn_in);
    append(out, l.ffn_out);
  }
  append(out, decoder_norm);
  append(out, output_head);
  return out;
}

std::vector<const Param*> Seq2SeqModel::parameters() const {
  auto ps = const_cast<Seq2SeqModel*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

std::size_t Seq2SeqModel::num_parameters() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

TargetTable target_table(const EmbeddingModel& embedding) {
  require(embedding.finalized(), "target embedding model must be finalized");
  TargetTable t{Vocabulary::with_specials(), Matrix()};
  const auto dim = static_cast<Eigen::Index>(embedding.dim());
  t.vectors.resize(static_cast<Eigen::Index>(Vocabulary::kNumSpecials + embedding.vocab_size()), dim);
  t.vectors.topRows(Vocabulary::kNumSpecials) = reserved_rows(embedding.dim());
  for (std::size_t i = 0; i < embedding.vocab_size(); ++i) {
    const TokenId id = t.vocab.add(embedding.token(i));
    require(id >= Vocabulary::kNumSpecials,
            "embedding vocabulary contains a reserved token: " + embedding.token(i));
    t.vectors.row(id) = embedding.exported_vector(i).cast<double>().transpose().normalized();
  }
  t.vectors.conservativeResize(static_cast<Eigen::Index>(t.vocab.size()), dim);
  return t;
}

Seq2SeqModel build_model(const ModelConfig& config, const Vocabulary& src_vocab,
                         const EmbeddingModel& tgt_embedding) {
  ModelConfig cfg = config;
  if (cfg.embed_dim == 0) cfg.embed_dim = tgt_embedding.dim();
  if (cfg.embed_dim != tgt_embedding.dim())
    throw Error("build_model: embed_dim " + std::to_string(cfg.embed_dim) +
                " does not match embedding dim " + std::to_string(tgt_embedding.dim()));
  if (cfg.head_kind == HeadKind::softmax) return build_softmax_model(cfg, src_vocab, target_table(tgt_embedding).vocab);
  std::mt19937_64 rng(cfg.seed);
  Seq2SeqModel m = skeleton(cfg, src_vocab, rng);
  auto table = target_table(tgt_embedding);
  m.tgt_vocab = std::move(table.vocab);
  m.decoder_input_table = table.vectors;
  m.output_table = std::move(table.vectors);
  m.input_projection = make_linear("input_projection", cfg.embed_dim, cfg.d_model, rng);
  m.output_head = make_linear("output_head", cfg.d_model, cfg.embed_dim, rng);
  return m;
}

Seq2SeqModel build_softmax_model(const ModelConfig& config, const Vocabulary& src_vocab,
                                 const Vocabulary& tgt_vocab) {
  require(tgt_vocab.has_specials(), "target vocabulary must start with the reserved tokens");
  ModelConfig cfg = config;
  cfg.head_kind = HeadKind::softmax;
  std::mt19937_64 rng(cfg.seed);
  Seq2SeqModel m = skeleton(cfg, src_vocab, rng);
  m.tgt_vocab = tgt_vocab;
  const auto v = static_cast<Eigen::Index>(tgt_vocab.size());
  m.tgt_embedding = make_param("tgt_embedding", v, static_cast<Eigen::Index>(cfg.d_model));
  normal_init(m.tgt_embedding, 1.0 / std::sqrt(static_cast<double>(cfg.d_model)), rng);
  m.output_head = make_linear("output_head", cfg.d_model, tgt_vocab.size(), rng);
  return m;
}

Seq2SeqModel allocate_model(const ModelConfig& config, const Vocabulary& src_vocab,
                            const Vocabulary& tgt_vocab) {
  if (config.head_kind == HeadKind::softmax) return build_softmax_model(config, src_vocab, tgt_vocab);
  require(config.embed_dim > 0, "continuous head needs embed_dim");
  std::mt19937_64 rng(config.seed);
  Seq2SeqModel m = skeleton(config, src_vocab, rng);
  m.tgt_vocab = tgt_vocab;
  m.decoder_input_table = Matrix::Zero(static_cast<Eigen::Index>(tgt_vocab.size()),
                                       static_cast<Eigen::Index>(config.embed_dim));
  m.output_table = m.decoder_input_table;
  m.input_projection = make_linear("input_projection", config.embed_dim, config.d_model, rng);
  m.output_head = make_linear("output_head", config.d_model, config.embed_dim, rng);
  return m;
}

Batch make_batch(const std::vector<const EncodedPair*>& pairs) {
  Batch b;
  Eigen::Index src_off = 0, tgt_off = 0;
  for (const auto* p : pairs) {
    require(!p->src.empty() && !p->tgt.empty(), "make_batch: empty side in sentence pair");
    const auto sl = static_cast<Eigen::Index>(p->src.size() + 1);
    const auto tl = static_cast<Eigen::Index>(p->tgt.size() + 1);
    b.src_ids.insert(b.src_ids.end(), p->src.begin(), p->src.end());
    b.src_ids.push_back(Vocabulary::kEosId);
    b.tgt_in.push_back(Vocabulary::kEosId);
    b.tgt_in.insert(b.tgt_in.end(), p->tgt.begin(), p->tgt.end());
    b.tgt_out.insert(b.tgt_out.end(), p->tgt.begin(), p->tgt.end());
    b.tgt_out.push_back(Vocabulary::kEosId);
    for (Eigen::Index i = 0; i < sl; ++i) b.src_positions.push_back(i);
    for (Eigen::Index i = 0; i < tl; ++i) b.tgt_positions.push_back(i);
    b.src_self.push_back({src_off, sl, src_off, sl});
    b.tgt_self.push_back({tgt_off, tl, tgt_off, tl});
    b.cross.push_back({tgt_off, tl, src_off, sl});
    src_off += sl;
    tgt_off += tl;
    ++b.sentences;
  }
  return b;
}

Graph::Id forward(Graph& g, Seq2SeqModel& m, const Batch& batch, double dropout,
                  std::mt19937_64* rng) {
  const auto d = static_cast<Eigen::Index>(m.config.d_model);
  const int heads = static_cast<int>(m.config.num_heads);
  auto drop = [&](Graph::Id x) { return rng ? g.dropout(x, dropout, *rng) : x; };
  const auto mem = encoder_graph(g, m, batch.src_ids, batch.src_positions, batch.src_self, dropout, rng);

  Graph::Id y;
  if (m.continuous()) {
    const double scale = std::sqrt(static_cast<double>(m.config.embed_dim));
    Matrix rows(static_cast<Eigen::Index>(batch.tgt_in.size()), m.decoder_input_table.cols());
    for (std::size_t i = 0; i < batch.tgt_in.size(); ++i)
      rows.row(static_cast<Eigen::Index>(i)) = scale * m.decoder_input_table.row(batch.tgt_in[i]);
    y = g.linear(g.constant(std::move(rows)), m.input_projection.w, m.input_projection.b);
  } else {
    y = g.gather(m.tgt_embedding, batch.tgt_in, std::sqrt(static_cast<double>(d)));
  }
  y = drop(g.add_constant(y, pe_rows(d, batch.tgt_positions)));
  for (auto& layer : m.decoder) {
    auto h = g.layer_norm(y, layer.norm_self.gain, layer.norm_self.bias);
    y = g.add(y, drop(mha(g, h, h, layer.self_attn, batch.tgt_self, heads, true)));
    h = g.layer_norm(y, layer.norm_cross.gain, layer.norm_cross.bias);
    y = g.add(y, drop(mha(g, h, mem, layer.cross_attn, batch.cross, heads, false)));
    h = g.layer_norm(y, layer.norm_ffn.gain, layer.norm_ffn.bias);
    y = g.add(y, drop(ffn(g, h, layer.ffn_in, layer.ffn_out)));
  }
  y = g.layer_norm(y, m.decoder_norm.gain, m.decoder_norm.bias);
  return g.linear(y, m.output_head.w, m.output_head.b);
}

Graph::Id loss_node(Graph& g, Seq2SeqModel& m, const Batch& batch, const LossOptions& opts,
                    double dropout, std::mt19937_64* rng) {
  const auto out = forward(g, m, batch, dropout, rng);
  if (!m.continuous()) return g.cross_entropy(out, batch.tgt_out, opts.label_smoothing);
  Matrix targets(static_cast<Eigen::Index>(batch.tgt_out.size()), m.output_table.cols());
  for (std::size_t i = 0; i < batch.tgt_out.size(); ++i)
    targets.row(static_cast<Eigen::Index>(i)) = m.output_table.row(batch.tgt_out[i]);
  return g.vmf_loss(out, targets, opts.vmf);
}

EncoderMemory encode_source(const Seq2SeqModel& model, const std::vector<TokenId>& src) {
  require(!src.empty(), "encode_source: empty source sentence");
  std::vector<TokenId> ids = src;
  ids.push_back(Vocabulary::kEosId);
  const auto n = static_cast<Eigen::Index>(ids.size());
  std::vector<Eigen::Index> pos(ids.size());
  for (Eigen::Index i = 0; i < n; ++i) pos[static_cast<std::size_t>(i)] = i;
  // A gradient-free graph only reads parameters.
  Graph g(false);
  auto& m = const_cast<Seq2SeqModel&>(model);
  EncoderMemory mem;
  mem.memory = g.value(encoder_graph(g, m, ids, pos, {{0, n, 0, n}}, 0.0, nullptr));
  for (const auto& layer : model.decoder) {
    mem.cross_k.push_back(plain_linear(mem.memory, layer.cross_attn.k));
    mem.cross_v.push_back(plain_linear(mem.memory, layer.cross_attn.v));
  }
  return mem;
}

DecoderCache empty_cache(const Seq2SeqModel& model) {
  DecoderCache c;
  const auto d = static_cast<Eigen::Index>(model.config.d_model);
  c.self_k.assign(model.decoder.size(), Matrix(0, d));
  c.self_v.assign(model.decoder.size(), Matrix(0, d));
  return c;
}

RowVector decoder_step(const Seq2SeqModel& m, const EncoderMemory& mem, DecoderCache& cache,
                       TokenId prev) {
  const auto d = static_cast<Eigen::Index>(m.config.d_model);
  const int heads = static_cast<int>(m.config.num_heads);
  require(prev >= 0 && static_cast<std::size_t>(prev) < m.tgt_vocab.size(), "decoder_step: bad token id");
  Matrix x;
  if (m.continuous()) {
    const double scale = std::sqrt(static_cast<double>(m.config.embed_dim));
    x = plain_linear(scale * m.decoder_input_table.row(prev), m.input_projection);
  } else {
    x = std::sqrt(static_cast<double>(d)) * m.tgt_embedding.value.row(prev);
  }
  x += pe_table(d, cache.steps + 1).row(cache.steps);
  for (std::size_t l = 0; l < m.decoder.size(); ++l) {
    const auto& layer = m.decoder[l];
    Matrix h = plain_norm(x, layer.norm_self);
    append_row(cache.self_k[l], plain_linear(h, layer.self_attn.k));
    append_row(cache.self_v[l], plain_linear(h, layer.self_attn.v));
    x += plain_linear(plain_attention(plain_linear(h, layer.self_attn.q), cache.self_k[l],
                                      cache.self_v[l], heads),
                      layer.self_attn.o);
    h = plain_norm(x, layer.norm_cross);
    x += plain_linear(plain_attention(plain_linear(h, layer.cross_attn.q), mem.cross_k[l],
                                      mem.cross_v[l], heads),
                      layer.cross_attn.o);
    h = plain_norm(x, layer.norm_ffn);
    x += plain_linear(plain_linear(h, layer.ffn_in).cwiseMax(0.0), layer.ffn_out);
  }
  ++cache.steps;
  return plain_linear(plain_norm(x, m.decoder_norm), m.output_head).row(0);
}

void swap_target_embeddings(Seq2SeqModel& model, const EmbeddingModel& embedding) {
  require(model.continuous(), "swap_target_embeddings: continuous head only");
  if (embedding.dim() != model.config.embed_dim)
    throw Error("finetune: embedding dim " + std::to_string(embedding.dim()) +
                " does not match model embed_dim " + std::to_string(model.config.embed_dim));
  auto table = target_table(embedding);
  model.tgt_vocab = std::move(table.vocab);
  model.decoder_input_table = table.vectors;
  model.output_table = std::move(table.vectors);
}

void remap_target_vocabulary(Seq2SeqModel& model, const Vocabulary& vocab, std::uint64_t seed) {
  require(!model.continuous(), "remap_target_vocabulary: softmax head only");
  require(vocab.has_specials(), "target vocabulary must start with the reserved tokens");
  if (vocab == model.tgt_vocab) return;
  std::mt19937_64 rng(seed);
  const auto d = static_cast<Eigen::Index>(model.config.d_model);
  const auto v = static_cast<Eigen::Index>(vocab.size());
  Param emb = make_param("tgt_embedding", v, d);
  normal_init(emb, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  LinearParams head = make_linear("output_head", model.config.d_model, vocab.size(), rng);
  for (TokenId i = 0; i < static_cast<TokenId>(vocab.size()); ++i) {
    if (auto old = model.tgt_vocab.find(vocab.token(i))) {
      emb.value.row(i) = model.tgt_embedding.value.row(*old);
      head.w.value.col(i) = model.output_head.w.value.col(*old);
      head.b.value(0, i) = model.output_head.b.value(0, *old);
    }
  }
  model.tgt_vocab = vocab;
  model.tgt_embedding = std::move(emb);
  model.output_head = std::move(head);
}

}  // namespace varmt::mt
