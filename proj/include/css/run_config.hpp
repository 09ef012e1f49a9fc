#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "css/chatbot.hpp"
#include "css/da_encoder.hpp"
#include "css/optim.hpp"
#include "css/seq2seq.hpp"
#include "json.hpp"

namespace css {

struct DataSettings {
  std::size_t vocab_size = 20000;
  std::vector<std::size_t> bucket_bounds{10, 15, 25, 50};
  double validation_fraction = 0.1;
  std::string act_column = "act_tag";
  std::string text_column = "text";
};

struct DASettings {
  std::size_t embed_dim = 128;
  std::size_t max_len = 25;
  std::vector<std::size_t> windows{3, 4, 5, 6, 8};
  std::size_t filters_per_window = 128;
  std::size_t hidden_dim = 512;
  std::string hidden_activation = "relu";
  double dropout = 0.5;
  std::size_t epochs = 10;
  std::size_t batch_size = 50;
};

struct Seq2SeqSettings {
  std::string mode = "css";
  std::size_t embed_dim = 128;
  std::size_t encoder_hidden = 256;
  std::size_t decoder_hidden = 256;
  std::size_t max_in_len = 50;
  std::size_t max_out_len = 50;
  std::string fusion_activation = "tanh";
  std::string attention_keys = "reduced";
  std::size_t window = 2;
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
};

struct DecodeSettings {
  std::string method = "beam";
  std::size_t beam_width = 3;
  double length_penalty = 0.0;
  std::size_t chosen_beam = 3;
  std::size_t max_out_len = 50;
  bool mask_unk = true;
};

/// Every tunable with its default. Files may give any subset; unknown keys
/// are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  DataSettings data;
  DASettings da;
  Seq2SeqSettings seq2seq;
  ContextOptions context;
  AdamConfig optimizer;
  DecodeSettings decode;

  DAEncoderConfig da_config(std::size_t vocab_size) const;
  DATrainConfig da_train() const;
  Seq2SeqConfig seq2seq_config(std::size_t vocab_size, std::size_t context_dim) const;
  Seq2SeqTrainConfig seq2seq_train() const;
  ChatOptions chat_options() const;
  GenerationOptions generation() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Overlays `j` onto `base`.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace css
