#include "css/run_config.hpp"

#include <fstream>

#include "css/errors.hpp"
#include "strict_json.hpp"

namespace css {

using nlohmann::json;

DAEncoderConfig RunConfig::da_config(std::size_t vocab_size) const {
  DAEncoderConfig c;
  c.vocab_size = vocab_size;
  c.embed_dim = da.embed_dim;
  c.max_len = da.max_len;
  c.windows = da.windows;
  c.filters_per_window = da.filters_per_window;
  c.hidden_dim = da.hidden_dim;
  c.hidden_activation = parse_activation(da.hidden_activation);
  c.dropout = da.dropout;
  c.validate();
  return c;
}

DATrainConfig RunConfig::da_train() const { return {da.epochs, da.batch_size, optimizer, seed}; }

Seq2SeqConfig RunConfig::seq2seq_config(std::size_t vocab_size, std::size_t context_dim) const {
  Seq2SeqConfig c;
  c.mode = parse_mode(seq2seq.mode);
  c.vocab_size = vocab_size;
  c.embed_dim = seq2seq.embed_dim;
  c.encoder_hidden = seq2seq.encoder_hidden;
  c.decoder_hidden = seq2seq.decoder_hidden;
  c.context_dim = context_dim;
  c.max_in_len = seq2seq.max_in_len;
  c.max_out_len = seq2seq.max_out_len;
  c.fusion_activation = parse_activation(seq2seq.fusion_activation);
  c.attention_keys = parse_attention_keys(seq2seq.attention_keys);
  c.window = seq2seq.window;
  c.validate();
  return c;
}

Seq2SeqTrainConfig RunConfig::seq2seq_train() const {
  return {seq2seq.epochs, seq2seq.batch_size, data.bucket_bounds, optimizer, seed};
}

ChatOptions RunConfig::chat_options() const { return {context, seq2seq.window}; }

GenerationOptions RunConfig::generation() const {
  GenerationOptions g;
  g.method = parse_decode_method(decode.method);
  g.beam.width = decode.beam_width;
  g.beam.length_penalty = decode.length_penalty;
  g.beam.chosen_beam = decode.chosen_beam;
  g.beam.decode.max_out_len = decode.max_out_len;
  g.beam.decode.mask_unk = decode.mask_unk;
  if (g.beam.width == 0 || g.beam.chosen_beam == 0 || g.beam.chosen_beam > g.beam.width) {
    throw ConfigError("decode needs 1 <= chosen_beam <= beam_width");
  }
  return g;
}

json to_json(const RunConfig& c) {
  return {
      {"seed", c.seed},
      {"data",
       {{"vocab_size", c.data.vocab_size},
        {"bucket_bounds", c.data.bucket_bounds},
        {"validation_fraction", c.data.validation_fraction},
        {"act_column", c.data.act_column},
        {"text_column", c.data.text_column}}},
      {"da",
       {{"embed_dim", c.da.embed_dim},
        {"max_len", c.da.max_len},
        {"windows", c.da.windows},
        {"filters_per_window", c.da.filters_per_window},
        {"hidden_dim", c.da.hidden_dim},
        {"hidden_activation", c.da.hidden_activation},
        {"dropout", c.da.dropout},
        {"epochs", c.da.epochs},
        {"batch_size", c.da.batch_size}}},
      {"seq2seq",
       {{"mode", c.seq2seq.mode},
        {"embed_dim", c.seq2seq.embed_dim},
        {"encoder_hidden", c.seq2seq.encoder_hidden},
        {"decoder_hidden", c.seq2seq.decoder_hidden},
        {"max_in_len", c.seq2seq.max_in_len},
        {"max_out_len", c.seq2seq.max_out_len},
        {"fusion_activation", c.seq2seq.fusion_activation},
        {"attention_keys", c.seq2seq.attention_keys},
        {"window", c.seq2seq.window},
        {"epochs", c.seq2seq.epochs},
        {"batch_size", c.seq2seq.batch_size}}},
      {"context",
       {{"pairs", c.context.pairs},
        {"include_current", c.context.include_current},
        {"policy", context_policy_name(c.context.policy)}}},
      {"optimizer",
       {{"learning_rate", c.optimizer.learning_rate},
        {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"epsilon", c.optimizer.epsilon},
        {"clip_norm", c.optimizer.clip_norm}}},
      {"decode",
       {{"method", c.decode.method},
        {"beam_width", c.decode.beam_width},
        {"length_penalty", c.decode.length_penalty},
        {"chosen_beam", c.decode.chosen_beam},
        {"max_out_len", c.decode.max_out_len},
        {"mask_unk", c.decode.mask_unk}}},
  };
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
  detail::StrictObject root(j, "config");
  root.opt("seed", c.seed);
  if (root.has("data")) {
    detail::StrictObject o(root.sub("data"), "config.data");
    o.opt("vocab_size", c.data.vocab_size);
    o.opt("bucket_bounds", c.data.bucket_bounds);
    o.opt("validation_fraction", c.data.validation_fraction);
    o.opt("act_column", c.data.act_column);
    o.opt("text_column", c.data.text_column);
    o.finish();
  }
  if (root.has("da")) {
    detail::StrictObject o(root.sub("da"), "config.da");
    o.opt("embed_dim", c.da.embed_dim);
    o.opt("max_len", c.da.max_len);
    o.opt("windows", c.da.windows);
    o.opt("filters_per_window", c.da.filters_per_window);
    o.opt("hidden_dim", c.da.hidden_dim);
    o.opt("hidden_activation", c.da.hidden_activation);
    o.opt("dropout", c.da.dropout);
    o.opt("epochs", c.da.epochs);
    o.opt("batch_size", c.da.batch_size);
    o.finish();
  }
  if (root.has("seq2seq")) {
    detail::StrictObject o(root.sub("seq2seq"), "config.seq2seq");
    o.opt("mode", c.seq2seq.mode);
    o.opt("embed_dim", c.seq2seq.embed_dim);
    o.opt("encoder_hidden", c.seq2seq.encoder_hidden);
    o.opt("decoder_hidden", c.seq2seq.decoder_hidden);
    o.opt("max_in_len", c.seq2seq.max_in_len);
    o.opt("max_out_len", c.seq2seq.max_out_len);
    o.opt("fusion_activation", c.seq2seq.fusion_activation);
    o.opt("attention_keys", c.seq2seq.attention_keys);
    o.opt("window", c.seq2seq.window);
    o.opt("epochs", c.seq2seq.epochs);
    o.opt("batch_size", c.seq2seq.batch_size);
    o.finish();
  }
  if (root.has("context")) {
    detail::StrictObject o(root.sub("context"), "config.context");
    o.opt("pairs", c.context.pairs);
    o.opt("include_current", c.context.include_current);
    std::string policy(context_policy_name(c.context.policy));
    o.opt("policy", policy);
    c.context.policy = parse_context_policy(policy);
    o.finish();
  }
  if (root.has("optimizer")) {
    detail::StrictObject o(root.sub("optimizer"), "config.optimizer");
    o.opt("learning_rate", c.optimizer.learning_rate);
    o.opt("beta1", c.optimizer.beta1);
    o.opt("beta2", c.optimizer.beta2);
    o.opt("epsilon", c.optimizer.epsilon);
    o.opt("clip_norm", c.optimizer.clip_norm);
    o.finish();
  }
  if (root.has("decode")) {
    detail::StrictObject o(root.sub("decode"), "config.decode");
    o.opt("method", c.decode.method);
    o.opt("beam_width", c.decode.beam_width);
    o.opt("length_penalty", c.decode.length_penalty);
    o.opt("chosen_beam", c.decode.chosen_beam);
    o.opt("max_out_len", c.decode.max_out_len);
    o.opt("mask_unk", c.decode.mask_unk);
    o.finish();
  }
  root.finish();
  // surface bad enum names at load time
  (void)parse_mode(c.seq2seq.mode);
  (void)parse_activation(c.da.hidden_activation);
  (void)parse_activation(c.seq2seq.fusion_activation);
  (void)parse_attention_keys(c.seq2seq.attention_keys);
  (void)parse_decode_method(c.decode.method);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace css
