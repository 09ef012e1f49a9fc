#include "css/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "css/errors.hpp"
#include "strict_json.hpp"

namespace css {

using nlohmann::json;

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), 8);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw CheckpointError("truncated checkpoint header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::size_t element_count(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  json dir = json::array();
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    if (t.data.size() != element_count(t.shape)) throw CheckpointError("tensor " + t.name + " size disagrees with shape");
    dir.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
    offset += 4 * t.data.size();
  }
  json header = {{"format_version", kCheckpointVersion},
                 {"kind", ckpt.kind},
                 {"config", ckpt.config},
                 {"extra", ckpt.extra.is_null() ? json::object() : ckpt.extra},
                 {"run", ckpt.run.is_null() ? json::object() : ckpt.run},
                 {"vocab", ckpt.vocab},
                 {"tensors", dir}};
  const std::string text = header.dump();
  out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::vector<char> buf;
  for (const auto& t : ckpt.tensors) {
    buf.resize(4 * t.data.size());
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(t.data[i]);
      for (int k = 0; k < 4; ++k) buf[4 * i + k] = static_cast<char>((bits >> (8 * k)) & 0xFF);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw IoError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), 8) || std::string_view(magic.data(), 8) != kCheckpointMagic) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  const auto len = get_u64(in);
  if (len > (std::uint64_t{1} << 32)) throw CheckpointError("implausible header length");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw CheckpointError("truncated checkpoint header");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }

  Checkpoint ck;
  try {
    detail::StrictObject h(header, "checkpoint header");
    if (h.get<std::size_t>("format_version") != static_cast<std::size_t>(kCheckpointVersion)) throw CheckpointError("unsupported checkpoint version");
    ck.kind = h.get<std::string>("kind");
    ck.config = h.sub("config");
    ck.extra = h.sub("extra");
    ck.run = h.sub("run");
    ck.vocab = h.sub("vocab").get<std::vector<std::string>>();
    std::uint64_t expect = 0;
    for (const auto& entry : h.sub("tensors")) {
      detail::StrictObject e(entry, "tensor entry");
      NamedTensor t;
      t.name = e.get<std::string>("name");
      t.shape = e.get<std::vector<std::size_t>>("shape");
      if (e.get<std::size_t>("offset") != expect) throw CheckpointError("tensor " + t.name + " is not contiguous");
      e.finish();
      t.data.resize(element_count(t.shape));
      expect += 4 * t.data.size();
      ck.tensors.push_back(std::move(t));
    }
    h.finish();
  } catch (const ConfigError& e) {
    throw CheckpointError(e.what());
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }

  std::vector<unsigned char> buf;
  for (auto& t : ck.tensors) {
    buf.resize(4 * t.data.size());
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
      throw CheckpointError("truncated payload in tensor " + t.name);
    }
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(buf[4 * i + k]) << (8 * k);
      t.data[i] = std::bit_cast<float>(bits);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes after payload");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

// ---------------------------------------------------------------------------
// configs

json to_json(const DAEncoderConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"embed_dim", c.embed_dim},
          {"max_len", c.max_len},
          {"windows", c.windows},
          {"filters_per_window", c.filters_per_window},
          {"hidden_dim", c.hidden_dim},
          {"num_classes", c.num_classes},
          {"hidden_activation", activation_name(c.hidden_activation)},
          {"dropout", c.dropout}};
}

DAEncoderConfig da_config_from_json(const json& j) {
  detail::StrictObject o(j, "dialogue-act config");
  DAEncoderConfig c;
  c.vocab_size = o.get<std::size_t>("vocab_size");
  c.embed_dim = o.get<std::size_t>("embed_dim");
  c.max_len = o.get<std::size_t>("max_len");
  c.windows = o.get<std::vector<std::size_t>>("windows");
  c.filters_per_window = o.get<std::size_t>("filters_per_window");
  c.hidden_dim = o.get<std::size_t>("hidden_dim");
  c.num_classes = o.get<std::size_t>("num_classes");
  c.hidden_activation = parse_activation(o.get<std::string>("hidden_activation"));
  c.dropout = o.get<double>("dropout");
  o.finish();
  return c;
}

json to_json(const Seq2SeqConfig& c) {
  return {{"mode", mode_name(c.mode)},
          {"vocab_size", c.vocab_size},
          {"embed_dim", c.embed_dim},
          {"encoder_hidden", c.encoder_hidden},
          {"decoder_hidden", c.decoder_hidden},
          {"context_dim", c.context_dim},
          {"max_in_len", c.max_in_len},
          {"max_out_len", c.max_out_len},
          {"fusion_activation", activation_name(c.fusion_activation)},
          {"attention_keys", attention_keys_name(c.attention_keys)},
          {"window", c.window}};
}

Seq2SeqConfig seq2seq_config_from_json(const json& j) {
  detail::StrictObject o(j, "seq2seq config");
  Seq2SeqConfig c;
  c.mode = parse_mode(o.get<std::string>("mode"));
  c.vocab_size = o.get<std::size_t>("vocab_size");
  c.embed_dim = o.get<std::size_t>("embed_dim");
  c.encoder_hidden = o.get<std::size_t>("encoder_hidden");
  c.decoder_hidden = o.get<std::size_t>("decoder_hidden");
  c.context_dim = o.get<std::size_t>("context_dim");
  c.max_in_len = o.get<std::size_t>("max_in_len");
  c.max_out_len = o.get<std::size_t>("max_out_len");
  c.fusion_activation = parse_activation(o.get<std::string>("fusion_activation"));
  c.attention_keys = parse_attention_keys(o.get<std::string>("attention_keys"));
  c.window = o.get<std::size_t>("window");
  o.finish();
  return c;
}

json to_json(const ContextOptions& o) {
  return {{"pairs", o.pairs}, {"include_current", o.include_current}, {"policy", context_policy_name(o.policy)}};
}

ContextOptions context_options_from_json(const json& j) {
  detail::StrictObject o(j, "context options");
  ContextOptions c;
  c.pairs = o.get<std::size_t>("pairs");
  c.include_current = o.get<bool>("include_current");
  c.policy = parse_context_policy(o.get<std::string>("policy"));
  o.finish();
  return c;
}

json to_json(const ChatOptions& o) { return {{"context", to_json(o.context)}, {"window", o.window}}; }

ChatOptions chat_options_from_json(const json& j) {
  detail::StrictObject o(j, "chat options");
  ChatOptions c;
  c.context = context_options_from_json(o.sub("context"));
  c.window = o.get<std::size_t>("window");
  o.finish();
  return c;
}

// ---------------------------------------------------------------------------
// tensors

template <typename T>
std::vector<NamedTensor> export_tensors(const ParameterSet<T>& params) {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    NamedTensor t;
    t.name = p.name;
    t.shape = p.value.shape();
    t.data.reserve(p.value.size());
    for (auto v : p.value.data()) t.data.push_back(static_cast<float>(v));
    out.push_back(std::move(t));
  }
  return out;
}

template std::vector<NamedTensor> export_tensors(const ParameterSet<float>&);
template std::vector<NamedTensor> export_tensors(const ParameterSet<double>&);

void import_tensors(ParameterSet<float>& params, const std::vector<NamedTensor>& tensors) {
  if (tensors.size() != params.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model has " +
                          std::to_string(params.size()) + " parameters");
  }
  for (const auto& t : tensors) {
    if (!params.contains(t.name)) throw CheckpointError("unexpected tensor " + t.name);
    auto& p = params.at(t.name);
    if (p.value.shape() != t.shape) {
      throw CheckpointError("tensor " + t.name + " has shape " + shape_string(t.shape) + ", model expects " +
                            shape_string(p.value.shape()));
    }
    std::copy(t.data.begin(), t.data.end(), p.value.data().begin());
  }
}

namespace {

void check_kind(const Checkpoint& ck, std::string_view kind) {
  if (ck.kind != kind) throw CheckpointError("expected a " + std::string(kind) + " checkpoint, found '" + ck.kind + "'");
}

template <typename C>
void check_expected(const json& stored, const C* expected) {
  if (!expected) return;
  const json want = to_json(*expected);
  for (const auto& [k, v] : want.items()) {
    if (!stored.contains(k) || stored.at(k) != v) {
      throw CheckpointError("checkpoint config differs at '" + k + "': stored " +
                            (stored.contains(k) ? stored.at(k).dump() : std::string("nothing")) + ", requested " +
                            v.dump());
    }
  }
}

Vocabulary vocab_of(const Checkpoint& ck, std::size_t expected_size) {
  if (ck.vocab.size() != expected_size) {
    throw CheckpointError("vocabulary of " + std::to_string(ck.vocab.size()) + " tokens for a model of " +
                          std::to_string(expected_size));
  }
  try {
    return Vocabulary::from_tokens(ck.vocab);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad vocabulary: ") + e.what());
  }
}

}  // namespace

Checkpoint make_checkpoint(const DAEncoder<float>& model, const Vocabulary& vocab, json run) {
  Checkpoint ck;
  ck.kind = "da";
  ck.config = to_json(model.config());
  ck.extra = json::object();
  ck.run = std::move(run);
  ck.vocab = vocab.tokens();
  ck.tensors = export_tensors(model.params());
  return ck;
}

Checkpoint make_checkpoint(const Seq2Seq<float>& model, const Vocabulary& vocab, const ChatOptions& chat, json run,
                           const std::string& da_fingerprint) {
  Checkpoint ck;
  ck.kind = "seq2seq";
  ck.config = to_json(model.config());
  ck.extra = {{"chat", to_json(chat)}, {"da_fingerprint", da_fingerprint.empty() ? json(nullptr) : json(da_fingerprint)}};
  ck.run = std::move(run);
  ck.vocab = vocab.tokens();
  ck.tensors = export_tensors(model.params());
  return ck;
}

LoadedDA load_da(const Checkpoint& ck, const DAEncoderConfig* expected) {
  check_kind(ck, "da");
  check_expected(ck.config, expected);
  DAEncoderConfig c;
  try {
    c = da_config_from_json(ck.config);
  } catch (const ConfigError& e) {
    throw CheckpointError(e.what());
  }
  DAEncoder<float> model(c);
  import_tensors(model.params(), ck.tensors);
  return {std::move(model), vocab_of(ck, c.vocab_size), ck.run};
}

LoadedSeq2Seq load_seq2seq(const Checkpoint& ck, const Seq2SeqConfig* expected) {
  check_kind(ck, "seq2seq");
  check_expected(ck.config, expected);
  Seq2SeqConfig c;
  ChatOptions chat;
  std::string fingerprint;
  try {
    c = seq2seq_config_from_json(ck.config);
    detail::StrictObject extra(ck.extra, "seq2seq extra");
    chat = chat_options_from_json(extra.sub("chat"));
    const auto& fp = extra.sub("da_fingerprint");
    if (fp.is_string()) fingerprint = fp.get<std::string>();
    extra.finish();
  } catch (const ConfigError& e) {
    throw CheckpointError(e.what());
  }
  Seq2Seq<float> model(c);
  import_tensors(model.params(), ck.tensors);
  return {std::move(model), vocab_of(ck, c.vocab_size), chat, fingerprint, ck.run};
}

}  // namespace css
