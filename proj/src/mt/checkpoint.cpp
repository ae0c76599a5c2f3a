#include "varmt/mt/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "varmt/common/binary_io.hpp"
#include "varmt/common/error.hpp"

namespace varmt::mt {
namespace {

constexpr char kMagic[] = "VMMT1";

void write_vocab(std::ostream& out, const Vocabulary& v) {
  binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(v.size()));
  for (const auto& t : v.tokens()) binio::write_string(out, t);
}

Vocabulary read_vocab(std::istream& in) {
  Vocabulary v;
  const auto n = binio::read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n; ++i)
    if (v.add(binio::read_string(in)) != static_cast<TokenId>(i))
      throw FormatError("duplicate token in checkpoint vocabulary");
  return v;
}

void write_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
  binio::write_string(out, name);
  binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  binio::write_f32(out, m.data(), static_cast<std::size_t>(m.size()));
}

std::size_t to_size(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const auto x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw FormatError("config block: bad value for " + key + ": " + v);
  }
}

}  // namespace

std::string config_block(const ModelConfig& c) {
  std::ostringstream s;
  s.precision(17);
  s << "d_model=" << c.d_model << '\n'
    << "num_layers_enc=" << c.num_layers_enc << '\n'
    << "num_layers_dec=" << c.num_layers_dec << '\n'
    << "num_heads=" << c.num_heads << '\n'
    << "ffn_dim=" << c.ffn_dim << '\n'
    << "dropout_rate=" << c.dropout_rate << '\n'
    << "embed_dim=" << c.embed_dim << '\n'
    << "head_kind=" << to_string(c.head_kind) << '\n'
    << "max_len=" << c.max_len << '\n'
    << "seed=" << c.seed << '\n';
  return s.str();
}

ModelConfig parse_config_block(const std::string& block) {
  ModelConfig c;
  std::istringstream in(block);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("config block: expected key=value, got " + line);
    const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "d_model") c.d_model = to_size(k, v);
    else if (k == "num_layers_enc") c.num_layers_enc = to_size(k, v);
    else if (k == "num_layers_dec") c.num_layers_dec = to_size(k, v);
    else if (k == "num_heads") c.num_heads = to_size(k, v);
    else if (k == "ffn_dim") c.ffn_dim = to_size(k, v);
    else if (k == "dropout_rate") c.dropout_rate = std::stod(v);
    else if (k == "embed_dim") c.embed_dim = to_size(k, v);
    else if (k == "head_kind") c.head_kind = parse_head_kind(v);
    else if (k == "max_len") c.max_len = to_size(k, v);
    else if (k == "seed") c.seed = to_size(k, v);
    else throw FormatError("config block: unknown key " + k);
  }
  c.validate();
  return c;
}

void save_model(const std::filesystem::path& path, const Seq2SeqModel& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  binio::write_magic(out, kMagic);
  binio::write_string(out, config_block(model.config));
  write_vocab(out, model.src_vocab);
  write_vocab(out, model.tgt_vocab);
  const auto params = model.parameters();
  const std::uint32_t n = static_cast<std::uint32_t>(params.size()) + (model.continuous() ? 2 : 0);
  binio::write_pod<std::uint32_t>(out, n);
  for (const auto* p : params) write_tensor(out, p->name, p->value);
  if (model.continuous()) {
    write_tensor(out, "decoder_input_table", model.decoder_input_table);
    write_tensor(out, "output_table", model.output_table);
  }
  if (!out) throw Error("write failed: " + path.string());
}

Seq2SeqModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  binio::expect_magic(in, kMagic);
  const auto config = parse_config_block(binio::read_string(in));
  const auto src = read_vocab(in);
  const auto tgt = read_vocab(in);
  Seq2SeqModel m = allocate_model(config, src, tgt);
  std::map<std::string, Matrix*> slots;
  for (auto* p : m.parameters()) slots[p->name] = &p->value;
  if (m.continuous()) {
    slots["decoder_input_table"] = &m.decoder_input_table;
    slots["output_table"] = &m.output_table;
  }
  const auto n = binio::read_pod<std::uint32_t>(in);
  if (n != slots.size())
    throw FormatError(path.string() + ": expected " + std::to_string(slots.size()) + " tensors, found " +
                      std::to_string(n));
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto name = binio::read_string(in);
    const auto rows = binio::read_pod<std::uint32_t>(in);
    const auto cols = binio::read_pod<std::uint32_t>(in);
    auto it = slots.find(name);
    if (it == slots.end()) throw FormatError(path.string() + ": unexpected tensor " + name);
    Matrix& dst = *it->second;
    if (dst.rows() != rows || dst.cols() != cols)
      throw FormatError(path.string() + ": tensor " + name + " has the wrong shape");
    binio::read_f32(in, dst.data(), static_cast<std::size_t>(dst.size()));
    slots.erase(it);
  }
  for (auto* p : m.parameters()) p->zero_grad();
  return m;
}

}  // namespace varmt::mt
