#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "css/chatbot.hpp"
#include "css/da_encoder.hpp"
#include "css/seq2seq.hpp"
#include "json.hpp"

namespace css {

// File layout: 8-byte magic, u64 little-endian header length, compact JSON
// header with sorted keys, then the payload of little-endian f32 tensors in
// directory order.
inline constexpr std::string_view kCheckpointMagic = "CSSCKPT1";
inline constexpr int kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::string kind;  // "da" or "seq2seq"
  nlohmann::json config;
  nlohmann::json extra;  // kind-specific settings, e.g. chat options
  nlohmann::json run;    // resolved run configuration, echoed verbatim
  std::vector<std::string> vocab;
  std::vector<NamedTensor> tensors;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
/// Throws CheckpointError on a bad magic, header or tensor directory.
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const DAEncoderConfig& c);
nlohmann::json to_json(const Seq2SeqConfig& c);
nlohmann::json to_json(const ContextOptions& o);
nlohmann::json to_json(const ChatOptions& o);
/// Strict: unknown or missing keys throw ConfigError.
DAEncoderConfig da_config_from_json(const nlohmann::json& j);
Seq2SeqConfig seq2seq_config_from_json(const nlohmann::json& j);
ContextOptions context_options_from_json(const nlohmann::json& j);
ChatOptions chat_options_from_json(const nlohmann::json& j);

template <typename T>
std::vector<NamedTensor> export_tensors(const ParameterSet<T>& params);

/// Copies tensors into `params` by name; every parameter must be present
/// with its shape and no extra tensors may remain.
void import_tensors(ParameterSet<float>& params, const std::vector<NamedTensor>& tensors);

struct LoadedDA {
  DAEncoder<float> model;
  Vocabulary vocab;
  nlohmann::json run;
};

struct LoadedSeq2Seq {
  Seq2Seq<float> model;
  Vocabulary vocab;
  ChatOptions chat;
  std::string da_fingerprint;  // of the dialogue-act checkpoint used in training, if any
  nlohmann::json run;
};

Checkpoint make_checkpoint(const DAEncoder<float>& model, const Vocabulary& vocab, nlohmann::json run = {});
Checkpoint make_checkpoint(const Seq2Seq<float>& model, const Vocabulary& vocab, const ChatOptions& chat,
                           nlohmann::json run = {}, const std::string& da_fingerprint = {});

/// A non-null `expected` config must equal the stored one.
LoadedDA load_da(const Checkpoint& ckpt, const DAEncoderConfig* expected = nullptr);
LoadedSeq2Seq load_seq2seq(const Checkpoint& ckpt, const Seq2SeqConfig* expected = nullptr);

}  // namespace css
