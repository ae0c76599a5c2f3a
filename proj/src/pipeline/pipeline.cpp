#include "varmt/pipeline/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "varmt/align/procrustes.hpp"
#include "varmt/backtranslate/backtranslate.hpp"
#include "varmt/common/error.hpp"
#include "varmt/common/files.hpp"
#include "varmt/embed/skipgram.hpp"
#include "varmt/eval/bleu.hpp"
#include "varmt/mt/checkpoint.hpp"
#include "varmt/mt/decode.hpp"
#include "varmt/textproc/bpe.hpp"

namespace varmt {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Input {
  std::string name;
  fs::path path;
};

// Everything a stage declares before running: what it reads, what it
// writes, and the settings that decide its result.
struct StageSpec {
  char stage;
  fs::path dir;
  std::string settings;
  std::vector<Input> inputs;
  std::vector<std::string> outputs;
};

json read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) return json();
  try {
    return json::parse(in);
  } catch (const json::exception&) {
    return json();
  }
}

bool up_to_date(const StageSpec& s) {
  const json m = read_manifest(s.dir);
  if (!m.is_object() || m.value("config_hash", "") != files::sha256_string(s.settings)) return false;
  for (const auto& in : s.inputs) {
    if (!m["inputs"].contains(in.name) || !fs::exists(in.path)) return false;
    if (m["inputs"][in.name]["sha256"] != files::sha256_file(in.path)) return false;
  }
  for (const auto& out : s.outputs) {
    if (!m["outputs"].contains(out) || !fs::exists(s.dir / out)) return false;
    if (m["outputs"][out] != files::sha256_file(s.dir / out)) return false;
  }
  return true;
}

void write_manifest(const StageSpec& s, const std::string& arm, const json& metrics, const json& notes,
                    double seconds) {
  json m;
  m["stage"] = std::string(1, s.stage);
  m["arm"] = arm;
  m["config_hash"] = files::sha256_string(s.settings);
  m["settings"] = s.settings;
  m["inputs"] = json::object();
  for (const auto& in : s.inputs)
    m["inputs"][in.name] = {{"path", in.path.string()}, {"sha256", files::sha256_file(in.path)}};
  m["outputs"] = json::object();
  for (const auto& out : s.outputs) m["outputs"][out] = files::sha256_file(s.dir / out);
  m["metrics"] = metrics;
  m["notes"] = notes;
  m["seconds"] = seconds;
  std::ofstream(s.dir / "manifest.json") << m.dump(2) << '\n';
}

void require_inputs(const StageSpec& s) {
  for (const auto& in : s.inputs)
    if (!fs::exists(in.path))
      throw Error(std::string("stage ") + s.stage + ": missing input " + in.name + " (" + in.path.string() +
                  ")");
}

TokenizedParallel tokenize_parallel(const ParallelCorpus& pc, const BpeSegmenter& src, const BpeSegmenter& tgt) {
  TokenizedParallel out;
  out.reserve(pc.size());
  for (const auto& [s, t] : pc.pairs) out.push_back({src.tokenize(s), tgt.tokenize(t)});
  return out;
}

// Pairs whose target side the model cannot produce are dropped.
std::size_t keep_known_targets(TokenizedParallel& data, const Vocabulary& vocab) {
  const std::size_t before = data.size();
  std::erase_if(data, [&](const TokenizedPair& p) {
    if (p.src.empty() || p.tgt.empty()) return true;
    for (const auto& t : p.tgt)
      if (!vocab.contains(t)) return true;
    return false;
  });
  return before - data.size();
}

void write_curve(const fs::path& path, const mt::TrainResult& r) {
  std::vector<std::string> lines{"step\ttrain_loss\tdev_loss"};
  for (const auto& p : r.curve) {
    std::ostringstream os;
    os << p.step << '\t' << std::setprecision(9) << p.train_loss << '\t';
    if (p.dev_loss) os << *p.dev_loss;
    lines.push_back(os.str());
  }
  files::write_lines(path, lines);
}

json train_metrics(const mt::TrainResult& r) {
  json m = {{"steps", r.steps}, {"skipped_long", r.skipped_long}, {"early_stopped", r.early_stopped}};
  if (!r.curve.empty()) m["final_train_loss"] = r.curve.back().train_loss;
  if (r.best_dev_loss) {
    m["best_dev_loss"] = *r.best_dev_loss;
    m["best_step"] = r.best_step;
  }
  return m;
}

double round1(double x) { return std::round(x * 10.0) / 10.0; }

// Translates the test source, writes the restored hypotheses and scores
// them against each reference set.
json evaluate_on_test(const mt::Seq2SeqModel& model, const BpeSegmenter& src_codes, const MonoCorpus& src,
                      const std::vector<std::pair<std::string, const MonoCorpus*>>& refs, std::size_t beam,
                      std::size_t threads, const fs::path& hyp_path) {
  const auto results = mt::translate_all(model, src_codes.tokenize_corpus(src), beam, true, threads);
  std::vector<std::string> hyps;
  std::size_t truncated = 0;
  for (const auto& r : results) {
    hyps.push_back(join_subwords(r.tokens));
    truncated += r.truncated;
  }
  files::write_lines(hyp_path, hyps);
  json m = {{"test_sentences", hyps.size()}, {"truncated", truncated}};
  for (const auto& [name, ref] : refs) {
    const auto b = bleu(hyps, ref->sentences);
    m[name] = b.score;
    m[name + "_rounded"] = round1(b.score);
  }
  return m;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config, std::ostream* log) : config_(std::move(config)), log_(log) {
  config_.validate();
}

fs::path Pipeline::stage_dir(char stage) const {
  const Ablation a = config_.ablation();
  std::string name(1, stage);
  if (stage == 'b' && a == Ablation::softmax) name += "-softmax";
  if (stage == 'd' && a == Ablation::scratch_embeddings) name += "-scratch-embeddings";
  if (stage == 'e' && a != Ablation::none) name += "-" + to_string(a);
  return config_.run_dir / name;
}

nlohmann::json read_stage_metrics(const fs::path& dir) {
  const json m = read_manifest(dir);
  if (!m.is_object()) throw Error("no manifest in " + dir.string());
  return m["metrics"];
}

std::vector<StageResult> Pipeline::run(const std::string& stages, bool force) {
  const std::string order = stages == "all" ? "abcde" : stages;
  for (char c : order)
    if (c < 'a' || c > 'e') throw Error("unknown stage '" + std::string(1, c) + "' (a|b|c|d|e|all)");
  std::vector<StageResult> out;
  for (char c : order) out.push_back(run_stage(c, force));
  return out;
}

StageResult Pipeline::run_stage(char stage, bool force) {
  const auto& c = config_;
  const auto& d = c.data;
  const Ablation arm = c.ablation();
  StageSpec s{stage, stage_dir(stage), stage_settings(c, stage), {}, {}};
  const fs::path a_dir = c.run_dir / "a";
  const fs::path b_dir = stage_dir('b');
  const fs::path c_dir = c.run_dir / "c";
  const fs::path d_dir = stage_dir('d');
  auto optional_input = [&](const char* name, const fs::path& p) {
    if (!p.empty()) s.inputs.push_back({name, p});
  };

  switch (stage) {
    case 'a':
      s.inputs = {{"src_train", d.src_train}, {"std_mono", d.std_mono}, {"tgt_mono", d.tgt_mono}};
      s.outputs = {"src.codes", "joint.codes", "std.vmeb"};
      break;
    case 'b':
      s.inputs = {{"src_train", d.src_train}, {"std_train", d.std_train}, {"src_test", d.src_test},
                  {"tgt_test", d.tgt_test},   {"a/src.codes", a_dir / "src.codes"},
                  {"a/joint.codes", a_dir / "joint.codes"}, {"a/std.vmeb", a_dir / "std.vmeb"}};
      optional_input("src_dev", d.src_dev);
      optional_input("std_dev", d.std_dev);
      optional_input("std_test", d.std_test);
      s.outputs = {"model.vmmt", "curve.tsv", "test.hyp"};
      break;
    case 'c':
      s.inputs = {{"src_train", d.src_train}, {"std_train", d.std_train}, {"tgt_mono", d.tgt_mono},
                  {"a/src.codes", a_dir / "src.codes"}, {"a/joint.codes", a_dir / "joint.codes"}};
      optional_input("src_dev", d.src_dev);
      optional_input("std_dev", d.std_dev);
      optional_input("tgt_mono_src", d.tgt_mono_src);
      s.outputs = {"reverse.vmmt", "curve.tsv", "pseudo.src", "pseudo.tgt", "pseudo.stats"};
      break;
    case 'd':
      s.inputs = {{"tgt_mono", d.tgt_mono}, {"a/joint.codes", a_dir / "joint.codes"},
                  {"a/std.vmeb", a_dir / "std.vmeb"}};
      s.outputs = {"tgt.vmeb", "align.map", "tgt.aligned.vmeb"};
      break;
    case 'e':
      s.inputs = {{"src_test", d.src_test},
                  {"tgt_test", d.tgt_test},
                  {"a/src.codes", a_dir / "src.codes"},
                  {"a/joint.codes", a_dir / "joint.codes"},
                  {"b/model.vmmt", b_dir / "model.vmmt"},
                  {"c/pseudo.src", c_dir / "pseudo.src"},
                  {"c/pseudo.tgt", c_dir / "pseudo.tgt"},
                  {"d/tgt.aligned.vmeb", d_dir / "tgt.aligned.vmeb"}};
      s.outputs = {"model.vmmt", "curve.tsv", "test.hyp"};
      break;
    default:
      throw Error("unknown stage '" + std::string(1, stage) + "'");
  }

  StageResult result{stage, s.dir, false, json::object()};
  if (!force && up_to_date(s)) {
    result.cached = true;
    result.metrics = read_manifest(s.dir)["metrics"];
    if (log_) *log_ << "[" << s.dir.filename().string() << "] up to date\n";
    return result;
  }
  require_inputs(s);
  fs::create_directories(s.dir);
  if (log_) *log_ << "[" << s.dir.filename().string() << "] running\n" << std::flush;
  const auto t0 = Clock::now();
  json metrics = json::object();
  json notes = json::array();

  auto load_codes = [&](const char* name) { return BpeSegmenter(load_bpe_codes(a_dir / name)); };

  if (stage == 'a') {
    const auto src_train = read_parallel(d.src_train, d.std_train, Origin::gold);
    MonoCorpus src_mono{{}, "src"};
    for (const auto& p : src_train.pairs) src_mono.sentences.push_back(p.first);
    const auto std_mono = read_mono_corpus(d.std_mono, "std");
    const auto tgt_mono = read_mono_corpus(d.tgt_mono, "tgt");
    const auto src_codes = learn_bpe(src_mono, c.src_merges);
    const auto joint_codes = learn_joint_bpe(std_mono, tgt_mono, c.joint_merges);
    save_bpe_codes(s.dir / "src.codes", src_codes);
    save_bpe_codes(s.dir / "joint.codes", joint_codes);
    const auto tokens = BpeSegmenter(joint_codes).tokenize_corpus(std_mono);
    const auto emb = finalize(train_embeddings(tokens, c.std_embeddings));
    save_embedding_model(s.dir / "std.vmeb", emb);
    std::size_t zero = 0;
    for (auto f : emb.zero_flags()) zero += f;
    metrics = {{"src_merges", src_codes.num_merges()},
               {"joint_merges", joint_codes.num_merges()},
               {"std_vocab", emb.vocab_size()},
               {"zero_vectors", zero}};
    notes.push_back("src codes learned on the src side of the training pairs; joint codes on std_mono + tgt_mono");
  }

  if (stage == 'b') {
    const auto src_codes = load_codes("src.codes");
    const auto joint = load_codes("joint.codes");
    const auto emb = load_embedding_model(a_dir / "std.vmeb");
    auto data = tokenize_parallel(read_parallel(d.src_train, d.std_train, Origin::gold), src_codes, joint);
    TokenizedCorpus src_side;
    for (const auto& p : data) src_side.push_back(p.src);
    const Vocabulary src_vocab = Vocabulary::build(src_side);

    mt::ModelConfig mc = c.model;
    mc.head_kind = c.head_kind;
    mt::Seq2SeqModel model;
    if (mc.head_kind == mt::HeadKind::continuous) {
      model = mt::build_model(mc, src_vocab, emb);
    } else {
      TokenizedCorpus tgt_side;
      for (const auto& p : data) tgt_side.push_back(p.tgt);
      model = mt::build_softmax_model(mc, src_vocab, Vocabulary::build(tgt_side));
    }
    const std::size_t dropped = keep_known_targets(data, model.tgt_vocab);
    std::optional<TokenizedParallel> dev;
    if (!d.src_dev.empty()) {
      dev = tokenize_parallel(read_parallel(d.src_dev, d.std_dev, Origin::gold), src_codes, joint);
      keep_known_targets(*dev, model.tgt_vocab);
    }
    const auto r = mt::train(model, data, c.train_b, dev ? &*dev : nullptr);
    mt::save_model(s.dir / "model.vmmt", model);
    write_curve(s.dir / "curve.tsv", r);
    metrics = train_metrics(r);
    metrics["train_pairs"] = data.size();
    metrics["dropped_unknown_target"] = dropped;
    metrics["head"] = to_string(mc.head_kind);
    const auto src_test = read_mono_corpus(d.src_test, "src");
    const auto tgt_test = read_mono_corpus(d.tgt_test, "tgt");
    std::vector<std::pair<std::string, const MonoCorpus*>> refs{{"bleu_tgt", &tgt_test}};
    MonoCorpus std_test;
    if (!d.std_test.empty()) {
      std_test = read_mono_corpus(d.std_test, "std");
      refs.emplace_back("bleu_std", &std_test);
    }
    metrics.update(evaluate_on_test(model, src_codes, src_test, refs, c.beam, c.threads, s.dir / "test.hyp"));
  }

  if (stage == 'c') {
    const auto src_codes = load_codes("src.codes");
    const auto joint = load_codes("joint.codes");
    // std side with the joint codes as input, src side with the src codes as output.
    auto swap = [&](const ParallelCorpus& pc) {
      TokenizedParallel out;
      for (const auto& [src, stdl] : pc.pairs) out.push_back({joint.tokenize(stdl), src_codes.tokenize(src)});
      return out;
    };
    const auto data = swap(read_parallel(d.src_train, d.std_train, Origin::gold));
    std::optional<TokenizedParallel> dev;
    if (!d.src_dev.empty()) dev = swap(read_parallel(d.src_dev, d.std_dev, Origin::gold));
    mt::ModelConfig rc = c.reverse_model;
    rc.head_kind = mt::HeadKind::softmax;
    const auto rev = train_reverse_model(data, rc, c.train_c, dev ? &*dev : nullptr);
    mt::save_model(s.dir / "reverse.vmmt", rev.model);
    write_curve(s.dir / "curve.tsv", rev.result);
    const auto tgt_mono = read_mono_corpus(d.tgt_mono, "tgt");
    const auto pseudo = synthesize_pseudo_parallel(rev.model, tgt_mono, joint, c.beam, c.threads);
    write_pseudo_parallel(s.dir / "pseudo", pseudo);
    metrics = train_metrics(rev.result);
    metrics["input"] = pseudo.stats.input;
    metrics["kept"] = pseudo.stats.kept;
    metrics["dropped"] = pseudo.stats.dropped;
    metrics["unk_rate"] = pseudo.stats.total_tokens
                              ? static_cast<double>(pseudo.stats.unk_tokens) / pseudo.stats.total_tokens
                              : 0.0;
    if (!d.tgt_mono_src.empty()) {
      const auto gold = read_mono_corpus(d.tgt_mono_src, "src");
      std::vector<std::string> hyp, ref;
      for (std::size_t i = 0; i < pseudo.kept.size(); ++i) {
        hyp.push_back(pseudo.corpus.pairs[i].first);
        ref.push_back(gold.sentences.at(pseudo.kept[i]));
      }
      metrics["bleu_vs_gold_src"] = bleu(hyp, ref).score;
    }
    notes.push_back("reverse model shares the src codes and the joint std/tgt codes with stage b");
    notes.push_back("tgt sentences are segmented with the joint codes; subwords unknown to the reverse model map to <unk>");
  }

  if (stage == 'd') {
    const auto joint = load_codes("joint.codes");
    const auto std_emb = load_embedding_model(a_dir / "std.vmeb");
    const auto tokens = joint.tokenize_corpus(read_mono_corpus(d.tgt_mono, "tgt"));
    SkipgramConfig sc = c.tgt_embeddings;
    sc.dim = std_emb.dim();
    sc.bucket_count = std_emb.bucket_count();
    sc.min_n = std_emb.min_n();
    sc.max_n = std_emb.max_n();
    const auto tgt = finalize(c.embeddings_from_scratch ? train_embeddings(tokens, sc)
                                                        : train_embeddings(tokens, sc, &std_emb));
    save_embedding_model(s.dir / "tgt.vmeb", tgt);
    const auto dict = build_seed_dictionary(std_emb, tgt);
    const auto map = align_embeddings(std_emb, tgt);
    save_alignment_map(s.dir / "align.map", map);
    save_embedding_model(s.dir / "tgt.aligned.vmeb", apply_alignment(map, tgt));
    metrics = {{"tgt_vocab", tgt.vocab_size()},
               {"seed_pairs", dict.count()},
               {"orthogonality_error", orthogonality_error(map.w)},
               {"transfer", !c.embeddings_from_scratch}};
    notes.push_back("alignment supervised by tokens identical in the std and tgt vocabularies");
  }

  if (stage == 'e') {
    const auto src_codes = load_codes("src.codes");
    const auto joint = load_codes("joint.codes");
    const auto tgt_emb = load_embedding_model(d_dir / "tgt.aligned.vmeb");
    auto pseudo =
        tokenize_parallel(read_parallel(c_dir / "pseudo.src", c_dir / "pseudo.tgt", Origin::pseudo), src_codes, joint);
    const std::size_t dropped = keep_known_targets(pseudo, mt::target_table(tgt_emb).vocab);
    mt::TrainConfig tc = c.train_e;
    tc.allow_unk_src = true;
    mt::Seq2SeqModel model = mt::load_model(b_dir / "model.vmmt");
    mt::TrainResult r;
    if (arm == Ablation::random_init) {
      // Same architecture and source vocabulary, untrained weights.
      mt::ModelConfig mc = c.model;
      mc.head_kind = mt::HeadKind::continuous;
      model = mt::build_model(mc, model.src_vocab, tgt_emb);
      r = mt::train(model, pseudo, tc);
      notes.push_back("random-init arm: freshly built model trained on the pseudo corpus with train_e settings");
    } else {
      r = mt::finetune(model, tgt_emb, pseudo, tc);
    }
    mt::save_model(s.dir / "model.vmmt", model);
    write_curve(s.dir / "curve.tsv", r);
    metrics = train_metrics(r);
    metrics["pseudo_pairs"] = pseudo.size();
    metrics["dropped_unknown_target"] = dropped;
    const auto src_test = read_mono_corpus(d.src_test, "src");
    const auto tgt_test = read_mono_corpus(d.tgt_test, "tgt");
    metrics.update(evaluate_on_test(model, src_codes, src_test, {{"bleu_tgt", &tgt_test}}, c.beam, c.threads,
                                    s.dir / "test.hyp"));
  }

  const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  write_manifest(s, to_string(arm), metrics, notes, seconds);
  result.metrics = metrics;
  if (log_) *log_ << "[" << s.dir.filename().string() << "] done in " << std::fixed << std::setprecision(1)
                  << seconds << " s " << metrics.dump() << "\n"
                  << std::defaultfloat << std::flush;
  return result;
}

}  // namespace varmt
