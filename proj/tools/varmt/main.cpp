#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "varmt/align/procrustes.hpp"
#include "varmt/backtranslate/backtranslate.hpp"
#include "varmt/common/error.hpp"
#include "varmt/common/files.hpp"
#include "varmt/common/utf8.hpp"
#include "varmt/embed/skipgram.hpp"
#include "varmt/eval/bleu.hpp"
#include "varmt/eval/fairness.hpp"
#include "varmt/eval/rare_words.hpp"
#include "varmt/mt/checkpoint.hpp"
#include "varmt/mt/decode.hpp"
#include "varmt/mt/train.hpp"
#include "varmt/pipeline/pipeline.hpp"
#include "varmt/pipeline/synthetic.hpp"
#include "varmt/textproc/bpe.hpp"
#include "varmt/vmf/check.hpp"

using namespace varmt;
namespace fs = std::filesystem;

namespace {

void add_skipgram_options(CLI::App* app, SkipgramConfig& c) {
  app->add_option("--dim", c.dim, "vector dimension")->capture_default_str();
  app->add_option("--window", c.window)->capture_default_str();
  app->add_option("--negatives", c.negatives)->capture_default_str();
  app->add_option("--epochs", c.epochs)->capture_default_str();
  app->add_option("--lr", c.learning_rate)->capture_default_str();
  app->add_option("--buckets", c.bucket_count)->capture_default_str();
  app->add_option("--min-count", c.min_count)->capture_default_str();
  app->add_option("--min-n", c.min_n)->capture_default_str();
  app->add_option("--max-n", c.max_n)->capture_default_str();
  app->add_option("--seed", c.seed)->capture_default_str();
  app->add_option("--threads", c.threads, "1 is deterministic")->capture_default_str();
}

void add_model_options(CLI::App* app, mt::ModelConfig& m) {
  app->add_option("--d-model", m.d_model)->capture_default_str();
  app->add_option("--enc-layers", m.num_layers_enc)->capture_default_str();
  app->add_option("--dec-layers", m.num_layers_dec)->capture_default_str();
  app->add_option("--heads", m.num_heads)->capture_default_str();
  app->add_option("--ffn", m.ffn_dim)->capture_default_str();
  app->add_option("--dropout", m.dropout_rate)->capture_default_str();
  app->add_option("--max-len", m.max_len)->capture_default_str();
  app->add_option("--model-seed", m.seed)->capture_default_str();
}

void add_train_options(CLI::App* app, mt::TrainConfig& t) {
  app->add_option("--batch-tokens", t.batch_tokens)->capture_default_str();
  app->add_option("--lr", t.lr_initial)->capture_default_str();
  app->add_option("--max-steps", t.max_steps)->capture_default_str();
  app->add_option("--validate-every", t.validate_every)->capture_default_str();
  app->add_option("--patience", t.patience)->capture_default_str();
  app->add_option("--clip-norm", t.clip_norm, "0 disables")->capture_default_str();
  app->add_option("--lambda1", t.loss.vmf.lambda1)->capture_default_str();
  app->add_option("--lambda2", t.loss.vmf.lambda2)->capture_default_str();
  app->add_option("--label-smoothing", t.loss.label_smoothing)->capture_default_str();
  app->add_option("--seed", t.seed)->capture_default_str();
}

void print_curve(const mt::TrainResult& r) {
  for (const auto& p : r.curve) {
    std::cerr << "step " << p.step << " train " << p.train_loss;
    if (p.dev_loss) std::cerr << " dev " << *p.dev_loss;
    std::cerr << '\n';
  }
  std::cerr << "steps " << r.steps << (r.early_stopped ? " (early stop)" : "");
  if (r.best_dev_loss) std::cerr << " best step " << r.best_step << " dev " << *r.best_dev_loss;
  if (r.skipped_long) std::cerr << " skipped " << r.skipped_long << " long pairs";
  std::cerr << '\n';
}

// Token list file: first whitespace field of each non-empty line.
std::vector<std::string> read_token_list(const fs::path& path) {
  std::vector<std::string> out;
  for (const auto& line : files::read_lines(path)) {
    const auto f = utf8::split_words(line);
    if (!f.empty()) out.push_back(f.front());
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"varmt: adapting src->std translation models to a related target variety"};
  app.require_subcommand(1);

  // learn-bpe
  std::string bpe_in, bpe_in2, bpe_out;
  std::size_t merges = 24000;
  auto* learn = app.add_subcommand("learn-bpe", "learn BPE merges (joint when --input2 is given)");
  learn->add_option("--input", bpe_in, "corpus, one sentence per line")->required();
  learn->add_option("--input2", bpe_in2, "second corpus for joint codes");
  learn->add_option("--merges", merges, "number of merge operations")->capture_default_str();
  learn->add_option("--output", bpe_out)->required();
  learn->callback([&] {
    const auto a = read_mono_corpus(bpe_in, "a");
    const auto codes = bpe_in2.empty() ? learn_bpe(a, merges) : learn_joint_bpe(a, read_mono_corpus(bpe_in2, "b"), merges);
    save_bpe_codes(bpe_out, codes);
    std::cerr << "learned " << codes.num_merges() << " merges\n";
  });

  // apply-bpe
  std::string codes_path, apply_in, apply_out;
  auto* apply = app.add_subcommand("apply-bpe", "segment a corpus with BPE codes");
  apply->add_option("--codes", codes_path)->required();
  apply->add_option("--input", apply_in)->required();
  apply->add_option("--output", apply_out)->required();
  apply->callback([&] {
    const BpeSegmenter seg(load_bpe_codes(codes_path));
    write_tokenized(apply_out, seg.tokenize_corpus(read_mono_corpus(apply_in, "")));
  });

  // train-embeddings
  SkipgramConfig sg;
  std::string emb_in, emb_out, emb_init, emb_vectors;
  auto* temb = app.add_subcommand("train-embeddings", "subword skip-gram on a segmented corpus");
  temb->add_option("--input", emb_in, "BPE-segmented corpus")->required();
  temb->add_option("--output", emb_out, "model file (VMEB1)")->required();
  temb->add_option("--init", emb_init, "continue from this model (transfer)");
  temb->add_option("--vectors", emb_vectors, "also write text vectors");
  add_skipgram_options(temb, sg);
  temb->callback([&] {
    const auto corpus = read_tokenized(emb_in);
    std::optional<EmbeddingModel> init;
    if (!emb_init.empty()) init = load_embedding_model(emb_init);
    const auto m = finalize(train_embeddings(corpus, sg, init ? &*init : nullptr));
    save_embedding_model(emb_out, m);
    if (!emb_vectors.empty()) write_text_vectors(emb_vectors, m);
    std::cerr << "vocab " << m.vocab_size() << " dim " << m.dim() << '\n';
  });

  // transfer-embeddings
  std::string parent_path, vocab_path, transfer_out;
  std::uint64_t transfer_seed = 1;
  auto* transfer = app.add_subcommand("transfer-embeddings", "initialize a variety model from a parent");
  transfer->add_option("--parent", parent_path, "finalized parent model")->required();
  transfer->add_option("--vocab", vocab_path, "token list, first field per line")->required();
  transfer->add_option("--output", transfer_out)->required();
  transfer->add_option("--seed", transfer_seed)->capture_default_str();
  transfer->callback([&] {
    const auto parent = load_embedding_model(parent_path);
    save_embedding_model(transfer_out, transfer_init(parent, read_token_list(vocab_path), transfer_seed));
  });

  // align-embeddings / apply-alignment
  std::string std_path, tgt_path, map_path, model_path, out_path;
  auto* align = app.add_subcommand("align-embeddings", "Procrustes map tgt->std from identical tokens");
  align->add_option("--std", std_path)->required();
  align->add_option("--tgt", tgt_path)->required();
  align->add_option("--out", map_path)->required();
  align->callback([&] {
    const auto s = load_embedding_model(std_path);
    const auto t = load_embedding_model(tgt_path);
    const auto dict = build_seed_dictionary(s, t);
    const auto map = align_embeddings(s, t);
    save_alignment_map(map_path, map);
    std::cerr << "seed pairs " << dict.count() << " orthogonality error " << orthogonality_error(map.w) << '\n';
  });
  auto* apply_align = app.add_subcommand("apply-alignment", "rotate a model's exported vectors");
  apply_align->add_option("--map", map_path)->required();
  apply_align->add_option("--model", model_path)->required();
  apply_align->add_option("--out", out_path)->required();
  apply_align->callback([&] {
    save_embedding_model(out_path, apply_alignment(load_alignment_map(map_path), load_embedding_model(model_path)));
  });

  // vmf-check
  std::size_t check_pairs = 100;
  std::uint64_t check_seed = 1;
  int check_status = 0;
  auto* vcheck = app.add_subcommand("vmf-check", "vMF gradient and normalizer checks");
  vcheck->add_option("--pairs", check_pairs, "pairs per dimension")->capture_default_str();
  vcheck->add_option("--seed", check_seed)->capture_default_str();
  vcheck->callback([&] {
    for (const auto& r : vmf::gradient_check({3, 50, 300}, check_pairs, 1e-5, 0.0, check_seed)) {
      const bool ok = r.max_relative_error < 1e-4;
      std::cout << "gradient d=" << r.dim << " pairs=" << r.pairs << " max_rel_err=" << r.max_relative_error
                << (ok ? " ok" : " FAIL") << '\n';
      if (!ok) check_status = 1;
    }
    const auto n = vmf::normalizer_check();
    const bool ok = n.max_closed_form_error < 1e-8 && n.max_switchover_jump < 1e-6;
    std::cout << "normalizer closed_form_err=" << n.max_closed_form_error
              << " switchover_jump=" << n.max_switchover_jump << (ok ? " ok" : " FAIL") << '\n';
    if (!ok) check_status = 1;
  });

  // train-mt
  mt::ModelConfig mc;
  mt::TrainConfig tc;
  std::string head = "continuous", tm_src, tm_tgt, tm_emb, tm_dev_src, tm_dev_tgt, tm_out;
  auto* tmt = app.add_subcommand("train-mt", "train a translation model on segmented parallel data");
  tmt->add_option("--src", tm_src, "segmented source side")->required();
  tmt->add_option("--tgt", tm_tgt, "segmented target side")->required();
  tmt->add_option("--embeddings", tm_emb, "target embeddings (continuous head)");
  tmt->add_option("--head", head, "continuous|softmax")->capture_default_str();
  tmt->add_option("--dev-src", tm_dev_src);
  tmt->add_option("--dev-tgt", tm_dev_tgt);
  tmt->add_option("--output", tm_out)->required();
  add_model_options(tmt, mc);
  add_train_options(tmt, tc);
  tmt->callback([&] {
    const auto data = read_tokenized_parallel(tm_src, tm_tgt);
    TokenizedCorpus src_side, tgt_side;
    for (const auto& p : data) {
      src_side.push_back(p.src);
      tgt_side.push_back(p.tgt);
    }
    mc.head_kind = mt::parse_head_kind(head);
    mt::Seq2SeqModel model;
    if (mc.head_kind == mt::HeadKind::continuous) {
      if (tm_emb.empty()) throw Error("train-mt: --embeddings is required for the continuous head");
      model = mt::build_model(mc, Vocabulary::build(src_side), load_embedding_model(tm_emb));
    } else {
      model = mt::build_softmax_model(mc, Vocabulary::build(src_side), Vocabulary::build(tgt_side));
    }
    std::optional<TokenizedParallel> dev;
    if (!tm_dev_src.empty()) dev = read_tokenized_parallel(tm_dev_src, tm_dev_tgt);
    print_curve(mt::train(model, data, tc, dev ? &*dev : nullptr));
    mt::save_model(tm_out, model);
  });

  // finetune-mt
  mt::TrainConfig ftc;
  ftc.lr_initial = 1e-4;
  std::string ft_model, ft_emb, ft_src, ft_tgt, ft_out;
  bool ft_unk = true;
  auto* fmt = app.add_subcommand("finetune-mt", "swap target embeddings and continue training");
  fmt->add_option("--model", ft_model)->required();
  fmt->add_option("--embeddings", ft_emb, "aligned target-variety embeddings")->required();
  fmt->add_option("--src", ft_src, "segmented pseudo source side")->required();
  fmt->add_option("--tgt", ft_tgt, "segmented target side")->required();
  fmt->add_option("--output", ft_out)->required();
  fmt->add_option("--allow-unk-src", ft_unk, "map unknown source tokens to <unk>")->capture_default_str();
  add_train_options(fmt, ftc);
  fmt->callback([&] {
    auto model = mt::load_model(ft_model);
    ftc.allow_unk_src = ft_unk;
    print_curve(mt::finetune(model, load_embedding_model(ft_emb), read_tokenized_parallel(ft_src, ft_tgt), ftc));
    mt::save_model(ft_out, model);
  });

  // translate
  std::string tr_model, tr_in, tr_out;
  std::size_t beam = 5, tr_threads = 1;
  bool restore = false;
  auto* tr = app.add_subcommand("translate", "translate a segmented file");
  tr->add_option("--model", tr_model)->required();
  tr->add_option("--input", tr_in, "segmented source")->required();
  tr->add_option("--output", tr_out, "default: stdout");
  tr->add_option("--beam", beam, "softmax head only")->capture_default_str();
  tr->add_option("--threads", tr_threads)->capture_default_str();
  tr->add_flag("--restore", restore, "join subwords in the output");
  tr->callback([&] {
    const auto model = mt::load_model(tr_model);
    const auto results = mt::translate_all(model, read_tokenized(tr_in), beam, true, tr_threads);
    std::vector<std::string> lines;
    for (const auto& r : results) {
      if (restore) {
        lines.push_back(join_subwords(r.tokens));
      } else {
        std::string s;
        for (const auto& t : r.tokens) s += (s.empty() ? "" : " ") + t;
        lines.push_back(s);
      }
    }
    if (tr_out.empty()) {
      for (const auto& l : lines) std::cout << l << '\n';
    } else {
      files::write_lines(tr_out, lines);
    }
  });

  // backtranslate
  std::string bt_model, bt_mono, bt_out, bt_codes;
  auto* bt = app.add_subcommand("backtranslate", "build a pseudo-parallel corpus from tgt text");
  bt->add_option("--model", bt_model, "reverse (std->src) model")->required();
  bt->add_option("--mono", bt_mono, "raw tgt sentences")->required();
  bt->add_option("--codes", bt_codes, "joint std/tgt BPE codes")->required();
  bt->add_option("--out", bt_out, "output stem")->required();
  bt->add_option("--beam", beam)->capture_default_str();
  bt->add_option("--threads", tr_threads)->capture_default_str();
  bt->callback([&] {
    const auto pseudo = synthesize_pseudo_parallel(mt::load_model(bt_model), read_mono_corpus(bt_mono, "tgt"),
                                                   BpeSegmenter(load_bpe_codes(bt_codes)), beam, tr_threads);
    write_pseudo_parallel(bt_out, pseudo);
    std::cerr << "kept " << pseudo.stats.kept << " dropped " << pseudo.stats.dropped << '\n';
  });

  // evaluate
  std::string hyp_path, ref_path, freq_path;
  bool exp_smoothing = false;
  auto* ev = app.add_subcommand("evaluate", "corpus BLEU (13a tokenization)");
  ev->add_option("--hyp", hyp_path)->required();
  ev->add_option("--ref", ref_path)->required();
  ev->add_flag("--smooth-exp", exp_smoothing, "exp smoothing for zero-match orders");
  ev->add_option("--freq-corpus", freq_path, "also report rare-word accuracy by frequency in this corpus");
  ev->callback([&] {
    const auto hyp = files::read_lines(hyp_path);
    const auto ref = files::read_lines(ref_path);
    const auto b = bleu(hyp, ref, exp_smoothing ? BleuSmoothing::exp : BleuSmoothing::none);
    std::cout << std::fixed << std::setprecision(1) << "BLEU = " << b.score << ' ' << 100 * b.precisions[0];
    for (int i = 1; i < 4; ++i) std::cout << '/' << 100 * b.precisions[i];
    std::cout << std::setprecision(3) << " (BP = " << b.brevity_penalty << " hyp_len = " << b.hyp_len
              << " ref_len = " << b.ref_len << ")\n";
    if (!freq_path.empty()) {
      const auto freq = word_frequencies(read_mono_corpus(freq_path, ""));
      for (const auto& r : rare_word_accuracy(hyp, ref, freq, default_frequency_buckets())) {
        std::cout << "freq " << r.bucket.label << '\t' << r.occurrences << '\t';
        if (r.accuracy) {
          std::cout << std::setprecision(1) << 100 * *r.accuracy;
        } else {
          std::cout << '-';
        }
        std::cout << '\n';
      }
    }
  });

  // fairness-report
  std::string scores_path, pops_path;
  double alpha = 2.0;
  std::vector<std::string> avg_exclude;
  auto* fr = app.add_subcommand("fairness-report", "aggregate and unfairness metrics over groups");
  fr->add_option("--scores", scores_path, "group<TAB>BLEU lines")->required();
  fr->add_option("--pops", pops_path, "group<TAB>population lines")->required();
  fr->add_option("--alpha", alpha)->capture_default_str();
  fr->add_option("--avg-exclude", avg_exclude, "groups left out of avg_L and avg_pop");
  fr->callback([&] {
    const auto benefits = read_benefits(scores_path, pops_path);
    std::cout << format_report(
        fairness_report(benefits, alpha, std::set<std::string>(avg_exclude.begin(), avg_exclude.end())));
  });

  // pipeline
  std::string cfg_path, stage = "all", ablation = "none";
  bool force = false;
  auto* pl = app.add_subcommand("pipeline", "run adaptation stages a-e");
  pl->add_option("--config", cfg_path)->required();
  pl->add_option("--stage", stage, "a|b|c|d|e|all")->capture_default_str();
  pl->add_option("--ablation", ablation, "softmax|random-init|scratch-embeddings")->capture_default_str();
  pl->add_flag("--force", force, "rerun stages even when up to date");
  pl->callback([&] {
    auto c = load_pipeline_config(cfg_path);
    if (ablation != "none") c.apply(parse_ablation(ablation));
    Pipeline p(c, &std::cerr);
    for (const auto& r : p.run(stage, force))
      std::cout << r.dir.filename().string() << (r.cached ? " cached " : " ") << r.metrics.dump() << '\n';
  });

  // make-fixture
  FixtureConfig fc;
  std::string fx_out;
  auto* mf = app.add_subcommand("make-fixture", "write the synthetic src/std/tgt fixture and a config");
  mf->add_option("--out", fx_out)->required();
  mf->add_option("--pairs", fc.train_pairs)->capture_default_str();
  mf->add_option("--tgt-mono", fc.tgt_mono)->capture_default_str();
  mf->add_option("--std-mono-extra", fc.std_mono_extra)->capture_default_str();
  mf->add_option("--test", fc.test_pairs)->capture_default_str();
  mf->add_option("--seed", fc.seed)->capture_default_str();
  mf->callback([&] {
    write_fixture(fx_out, make_fixture(fc));
    std::ofstream(fs::path(fx_out) / "pipeline.ini") << desk_config(".", "run", fc.seed);
    std::cerr << "wrote fixture and pipeline.ini to " << fx_out << '\n';
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return check_status;
}
