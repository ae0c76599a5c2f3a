#include "varmt/pipeline/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <map>
#include <set>
#include <sstream>

#include "varmt/common/error.hpp"

namespace varmt {

namespace pt = boost::property_tree;

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::softmax: return "softmax";
    case Ablation::random_init: return "random-init";
    case Ablation::scratch_embeddings: return "scratch-embeddings";
  }
  return "none";
}

Ablation parse_ablation(const std::string& name) {
  if (name == "none" || name.empty()) return Ablation::none;
  if (name == "softmax") return Ablation::softmax;
  if (name == "random-init") return Ablation::random_init;
  if (name == "scratch-embeddings") return Ablation::scratch_embeddings;
  throw Error("unknown ablation '" + name + "' (softmax|random-init|scratch-embeddings)");
}

Ablation PipelineConfig::ablation() const {
  const int flags = (head_kind == mt::HeadKind::softmax) + random_init + embeddings_from_scratch;
  if (flags > 1) throw Error("config: at most one ablation flag may be set");
  if (head_kind == mt::HeadKind::softmax) return Ablation::softmax;
  if (random_init) return Ablation::random_init;
  if (embeddings_from_scratch) return Ablation::scratch_embeddings;
  return Ablation::none;
}

void PipelineConfig::apply(Ablation a) {
  head_kind = mt::HeadKind::continuous;
  random_init = false;
  embeddings_from_scratch = false;
  if (a == Ablation::softmax) head_kind = mt::HeadKind::softmax;
  if (a == Ablation::random_init) random_init = true;
  if (a == Ablation::scratch_embeddings) embeddings_from_scratch = true;
}

void PipelineConfig::validate() const {
  auto need = [](const std::filesystem::path& p, const char* key) {
    if (p.empty()) throw Error(std::string("config: data.") + key + " is required");
  };
  need(data.src_train, "src_train");
  need(data.std_train, "std_train");
  need(data.std_mono, "std_mono");
  need(data.tgt_mono, "tgt_mono");
  need(data.src_test, "src_test");
  need(data.tgt_test, "tgt_test");
  if (data.src_dev.empty() != data.std_dev.empty())
    throw Error("config: data.src_dev and data.std_dev go together");
  if (threads == 0) throw Error("config: run.threads must be positive");
  if (beam == 0) throw Error("config: decode.beam must be positive");
  model.validate();
  reverse_model.validate();
  train_b.validate();
  train_c.validate();
  train_e.validate();
  ablation();
}

namespace {

using Keys = std::map<std::string, std::set<std::string>>;

const Keys kSkipgramKeys{{"", {"dim", "window", "negatives", "epochs", "lr", "buckets", "min_count", "min_n", "max_n"}}};
const std::set<std::string> kModelKeys{"d_model", "enc_layers", "dec_layers", "heads", "ffn", "dropout", "max_len"};
const std::set<std::string> kTrainKeys{"batch_tokens", "lr",      "max_steps", "validate_every", "patience",
                                       "clip_norm",    "lambda1", "lambda2",   "label_smoothing"};

const Keys kAllowed{
    {"run", {"dir", "seed", "threads"}},
    {"data",
     {"src_train", "std_train", "src_dev", "std_dev", "std_mono", "tgt_mono", "src_test", "tgt_test", "std_test",
      "tgt_mono_src"}},
    {"bpe", {"src_merges", "joint_merges"}},
    {"embeddings", kSkipgramKeys.at("")},
    {"tgt_embeddings", {"window", "negatives", "epochs", "lr", "min_count"}},
    {"model", kModelKeys},
    {"reverse_model", kModelKeys},
    {"train_b", kTrainKeys},
    {"train_c", kTrainKeys},
    {"train_e", kTrainKeys},
    {"decode", {"beam"}},
    {"ablation", {"head", "random_init", "embeddings_from_scratch"}},
};

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw Error("config: expected a boolean, got '" + s + "'");
}

template <class T>
void read(const pt::ptree& tree, const std::string& section, const std::string& key, T& out) {
  const auto sec = tree.get_child_optional(section);
  if (!sec) return;
  const auto v = sec->get_optional<std::string>(key);
  if (!v) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      out = parse_bool(*v);
    } else if constexpr (std::is_same_v<T, std::string>) {
      out = *v;
    } else {
      std::size_t used = 0;
      if constexpr (std::is_floating_point_v<T>) {
        out = static_cast<T>(std::stod(*v, &used));
      } else {
        if (!v->empty() && v->front() == '-') throw std::invalid_argument("negative");
        out = static_cast<T>(std::stoull(*v, &used));
      }
      if (used != v->size()) throw std::invalid_argument("trailing characters");
    }
  } catch (const std::logic_error&) {
    throw Error("config: bad value '" + *v + "' for " + section + "." + key);
  }
}

void read_model(const pt::ptree& t, const std::string& s, mt::ModelConfig& m) {
  read(t, s, "d_model", m.d_model);
  read(t, s, "enc_layers", m.num_layers_enc);
  read(t, s, "dec_layers", m.num_layers_dec);
  read(t, s, "heads", m.num_heads);
  read(t, s, "ffn", m.ffn_dim);
  read(t, s, "dropout", m.dropout_rate);
  read(t, s, "max_len", m.max_len);
}

void read_train(const pt::ptree& t, const std::string& s, mt::TrainConfig& c) {
  read(t, s, "batch_tokens", c.batch_tokens);
  read(t, s, "lr", c.lr_initial);
  read(t, s, "max_steps", c.max_steps);
  read(t, s, "validate_every", c.validate_every);
  read(t, s, "patience", c.patience);
  read(t, s, "clip_norm", c.clip_norm);
  read(t, s, "lambda1", c.loss.vmf.lambda1);
  read(t, s, "lambda2", c.loss.vmf.lambda2);
  read(t, s, "label_smoothing", c.loss.label_smoothing);
}

void read_skipgram(const pt::ptree& t, const std::string& s, SkipgramConfig& c) {
  read(t, s, "dim", c.dim);
  read(t, s, "window", c.window);
  read(t, s, "negatives", c.negatives);
  read(t, s, "epochs", c.epochs);
  read(t, s, "lr", c.learning_rate);
  read(t, s, "buckets", c.bucket_count);
  read(t, s, "min_count", c.min_count);
  read(t, s, "min_n", c.min_n);
  read(t, s, "max_n", c.max_n);
}

}  // namespace

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error("config: " + std::string(e.what()));
  }
  for (const auto& [section, body] : tree) {
    auto it = kAllowed.find(section);
    if (it == kAllowed.end()) throw Error("config: unknown section [" + section + "]");
    if (!body.data().empty()) throw Error("config: key '" + section + "' outside a section");
    for (const auto& [key, _] : body)
      if (!it->second.count(key)) throw Error("config: unknown key " + section + "." + key);
  }

  PipelineConfig c;
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  auto resolve = [&](const std::string& key, std::filesystem::path& out) {
    std::string v;
    read(tree, "data", key, v);
    if (!v.empty()) out = std::filesystem::path(v).is_absolute() ? std::filesystem::path(v) : base / v;
  };
  std::string dir = "run";
  read(tree, "run", "dir", dir);
  c.run_dir = std::filesystem::path(dir).is_absolute() ? std::filesystem::path(dir) : base / dir;
  read(tree, "run", "seed", c.seed);
  read(tree, "run", "threads", c.threads);
  resolve("src_train", c.data.src_train);
  resolve("std_train", c.data.std_train);
  resolve("src_dev", c.data.src_dev);
  resolve("std_dev", c.data.std_dev);
  resolve("std_mono", c.data.std_mono);
  resolve("tgt_mono", c.data.tgt_mono);
  resolve("src_test", c.data.src_test);
  resolve("tgt_test", c.data.tgt_test);
  resolve("std_test", c.data.std_test);
  resolve("tgt_mono_src", c.data.tgt_mono_src);

  read(tree, "bpe", "src_merges", c.src_merges);
  read(tree, "bpe", "joint_merges", c.joint_merges);

  // Desk-scale embedding defaults; the bucket table is sized for CPU memory.
  c.std_embeddings.dim = 64;
  c.std_embeddings.bucket_count = 200'000;
  read_skipgram(tree, "embeddings", c.std_embeddings);
  c.tgt_embeddings = c.std_embeddings;
  read(tree, "tgt_embeddings", "window", c.tgt_embeddings.window);
  read(tree, "tgt_embeddings", "negatives", c.tgt_embeddings.negatives);
  read(tree, "tgt_embeddings", "epochs", c.tgt_embeddings.epochs);
  read(tree, "tgt_embeddings", "lr", c.tgt_embeddings.learning_rate);
  read(tree, "tgt_embeddings", "min_count", c.tgt_embeddings.min_count);

  read_model(tree, "model", c.model);
  c.reverse_model = c.model;
  read_model(tree, "reverse_model", c.reverse_model);
  read_train(tree, "train_b", c.train_b);
  c.train_c = c.train_b;
  read_train(tree, "train_c", c.train_c);
  c.train_e = c.train_b;
  c.train_e.lr_initial = 1e-4;
  read_train(tree, "train_e", c.train_e);
  read(tree, "decode", "beam", c.beam);

  std::string head = "continuous";
  read(tree, "ablation", "head", head);
  c.head_kind = mt::parse_head_kind(head);
  read(tree, "ablation", "random_init", c.random_init);
  read(tree, "ablation", "embeddings_from_scratch", c.embeddings_from_scratch);

  // One seed drives every stage.
  c.std_embeddings.seed = c.tgt_embeddings.seed = c.seed;
  c.model.seed = c.reverse_model.seed = c.seed;
  c.train_b.seed = c.train_c.seed = c.train_e.seed = c.seed;
  c.std_embeddings.threads = c.tgt_embeddings.threads = c.threads;
  c.validate();
  return c;
}

namespace {

void dump_skipgram(std::map<std::string, std::string>& m, const std::string& s, const SkipgramConfig& c) {
  m[s + ".dim"] = std::to_string(c.dim);
  m[s + ".window"] = std::to_string(c.window);
  m[s + ".negatives"] = std::to_string(c.negatives);
  m[s + ".epochs"] = std::to_string(c.epochs);
  std::ostringstream lr;
  lr.precision(17);
  lr << c.learning_rate;
  m[s + ".lr"] = lr.str();
  m[s + ".buckets"] = std::to_string(c.bucket_count);
  m[s + ".min_count"] = std::to_string(c.min_count);
  m[s + ".min_n"] = std::to_string(c.min_n);
  m[s + ".max_n"] = std::to_string(c.max_n);
  m[s + ".threads"] = std::to_string(c.threads);
}

std::string num(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

void dump_model(std::map<std::string, std::string>& m, const std::string& s, const mt::ModelConfig& c) {
  m[s + ".d_model"] = std::to_string(c.d_model);
  m[s + ".enc_layers"] = std::to_string(c.num_layers_enc);
  m[s + ".dec_layers"] = std::to_string(c.num_layers_dec);
  m[s + ".heads"] = std::to_string(c.num_heads);
  m[s + ".ffn"] = std::to_string(c.ffn_dim);
  m[s + ".dropout"] = num(c.dropout_rate);
  m[s + ".max_len"] = std::to_string(c.max_len);
  m[s + ".seed"] = std::to_string(c.seed);
}

void dump_train(std::map<std::string, std::string>& m, const std::string& s, const mt::TrainConfig& c) {
  m[s + ".batch_tokens"] = std::to_string(c.batch_tokens);
  m[s + ".lr"] = num(c.lr_initial);
  m[s + ".max_steps"] = std::to_string(c.max_steps);
  m[s + ".validate_every"] = std::to_string(c.validate_every);
  m[s + ".patience"] = std::to_string(c.patience);
  m[s + ".clip_norm"] = num(c.clip_norm);
  m[s + ".lambda1"] = num(c.loss.vmf.lambda1);
  m[s + ".lambda2"] = num(c.loss.vmf.lambda2);
  m[s + ".label_smoothing"] = num(c.loss.label_smoothing);
  m[s + ".seed"] = std::to_string(c.seed);
}

}  // namespace

std::string stage_settings(const PipelineConfig& c, char stage) {
  std::map<std::string, std::string> m;
  switch (stage) {
    case 'a':
      m["bpe.src_merges"] = std::to_string(c.src_merges);
      m["bpe.joint_merges"] = std::to_string(c.joint_merges);
      dump_skipgram(m, "embeddings", c.std_embeddings);
      break;
    case 'b':
      dump_model(m, "model", c.model);
      dump_train(m, "train_b", c.train_b);
      m["ablation.head"] = to_string(c.head_kind);
      m["run.threads"] = std::to_string(c.threads);
      break;
    case 'c':
      dump_model(m, "reverse_model", c.reverse_model);
      dump_train(m, "train_c", c.train_c);
      m["decode.beam"] = std::to_string(c.beam);
      break;
    case 'd':
      dump_skipgram(m, "tgt_embeddings", c.tgt_embeddings);
      m["ablation.embeddings_from_scratch"] = c.embeddings_from_scratch ? "true" : "false";
      break;
    case 'e':
      dump_model(m, "model", c.model);
      dump_train(m, "train_e", c.train_e);
      m["decode.beam"] = std::to_string(c.beam);
      m["ablation"] = to_string(c.ablation());
      m["run.threads"] = std::to_string(c.threads);
      break;
    default:
      throw Error(std::string("unknown stage '") + stage + "'");
  }
  std::string out;
  for (const auto& [k, v] : m) out += k + "=" + v + "\n";
  return out;
}

std::string desk_config(const std::filesystem::path& data_dir,
                        const std::filesystem::path& run_dir, std::uint64_t seed) {
  const auto f = [&](const char* name) { return (data_dir / name).generic_string(); };
  std::ostringstream o;
  o << "[run]\ndir = " << run_dir.generic_string() << "\nseed = " << seed << "\nthreads = 1\n\n"
    << "[data]\n"
    << "src_train = " << f("train.src") << "\nstd_train = " << f("train.std") << '\n'
    << "src_dev = " << f("dev.src") << "\nstd_dev = " << f("dev.std") << '\n'
    << "std_mono = " << f("std.mono") << "\ntgt_mono = " << f("tgt.mono") << '\n'
    << "src_test = " << f("test.src") << "\ntgt_test = " << f("test.tgt") << '\n'
    << "std_test = " << f("test.std") << "\ntgt_mono_src = " << f("tgt.mono.src") << "\n\n"
    << "[bpe]\nsrc_merges = 800\njoint_merges = 3000\n\n"
    << "[embeddings]\ndim = 64\nepochs = 30\nbuckets = 200000\n\n"
    << "[tgt_embeddings]\nepochs = 30\nlr = 0.003\nnegatives = 15\n\n"
    << "[model]\nd_model = 64\nenc_layers = 2\ndec_layers = 2\nheads = 4\nffn = 128\n"
    << "dropout = 0.1\nmax_len = 80\n\n"
    << "[train_b]\nbatch_tokens = 1024\nlr = 0.01\nmax_steps = 3000\nvalidate_every = 500\n"
    << "patience = 3\n\n"
    << "[train_e]\nlr = 0.0001\nmax_steps = 300\nvalidate_every = 300\n";
  return o.str();
}

}  // namespace varmt
