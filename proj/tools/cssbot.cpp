// cssbot: train, evaluate, chat with and serve the context-aware seq2seq bot.
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "css/commands.hpp"
#include "css/errors.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<std::size_t> vocab_size;
  std::optional<std::string> mode;
  std::optional<std::size_t> window;
  std::optional<std::string> attention_keys;
  std::optional<std::string> context_policy;
  bool include_current = false;
  std::optional<std::string> decode;
  std::optional<std::size_t> beam_width;
  std::optional<std::size_t> chosen_beam;
  std::optional<double> length_penalty;
};

void add_train_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("--epochs", o.epochs, "Training epochs");
  sub->add_option("--batch-size", o.batch_size, "Examples per batch");
  sub->add_option("--lr", o.lr, "Adam learning rate");
  sub->add_option("--vocab-size", o.vocab_size, "Vocabulary cap, reserved tokens included");
}

void add_decode_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("--decode", o.decode, "greedy or beam")->check(CLI::IsMember({"greedy", "beam"}));
  sub->add_option("--beam-width", o.beam_width, "Beam width");
  sub->add_option("--chosen-beam", o.chosen_beam, "1-based rank of the returned beam");
  sub->add_option("--length-penalty", o.length_penalty, "Score = logprob / len^alpha");
}

// Which section's epochs/batch size the train flags refer to.
enum class Target { none, da, seq2seq };

css::RunConfig resolve(const std::optional<std::string>& path, const Overrides& o, Target target) {
  css::RunConfig c = path ? css::load_run_config(*path) : css::RunConfig{};
  if (o.seed) c.seed = *o.seed;
  if (o.lr) c.optimizer.learning_rate = *o.lr;
  if (o.vocab_size) c.data.vocab_size = *o.vocab_size;
  if (target == Target::da) {
    if (o.epochs) c.da.epochs = *o.epochs;
    if (o.batch_size) c.da.batch_size = *o.batch_size;
  } else if (target == Target::seq2seq) {
    if (o.epochs) c.seq2seq.epochs = *o.epochs;
    if (o.batch_size) c.seq2seq.batch_size = *o.batch_size;
  }
  if (o.mode) c.seq2seq.mode = *o.mode;
  if (o.window) c.seq2seq.window = *o.window;
  if (o.attention_keys) c.seq2seq.attention_keys = *o.attention_keys;
  if (o.context_policy) c.context.policy = css::parse_context_policy(*o.context_policy);
  if (o.include_current) c.context.include_current = true;
  if (o.decode) c.decode.method = *o.decode;
  if (o.beam_width) c.decode.beam_width = *o.beam_width;
  if (o.chosen_beam) c.decode.chosen_beam = *o.chosen_beam;
  if (o.length_penalty) c.decode.length_penalty = *o.length_penalty;
  return css::run_config_from_json(css::to_json(c));  // re-validate the merged result
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-aware sequence-to-sequence chatbot"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::string> config_path;
  Overrides o;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Seed for every random stream (default 0)");

  css::TrainDAArgs da;
  std::optional<std::string> mapping, history, confusion;
  auto* train_da = app.add_subcommand("train-da", "Train the dialogue-act classifier on SwDA-style CSVs");
  train_da->add_option("--swda", da.swda, "Directory of SwDA CSVs, or one CSV")->required();
  train_da->add_option("--mapping", mapping, "Tag mapping file (raw_tag<TAB>Class)");
  train_da->add_option("--out", da.out, "Checkpoint to write")->required();
  train_da->add_option("--history", history, "Loss history CSV (default <out>.history.csv)");
  train_da->add_option("--confusion", confusion, "Confusion matrix CSV (default <out>.confusion.csv)");
  add_train_flags(train_da, o);

  css::TrainSeq2SeqArgs s2s;
  std::optional<std::string> s2s_da, loss_csv;
  auto* train_s2s = app.add_subcommand("train-seq2seq", "Train a response generator on Cornell-style files");
  train_s2s->add_option("--lines", s2s.lines, "movie_lines.txt")->required();
  train_s2s->add_option("--conversations", s2s.conversations, "movie_conversations.txt")->required();
  train_s2s->add_option("--da-ckpt", s2s_da, "Dialogue-act checkpoint (required for css)");
  train_s2s->add_option("--out", s2s.out, "Checkpoint to write")->required();
  train_s2s->add_option("--loss-csv", loss_csv, "Loss history CSV (default <out>.loss.csv)");
  train_s2s->add_option("--mode", o.mode, "baseline1, baseline2 or css")
      ->check(CLI::IsMember({"baseline1", "baseline2", "css"}));
  train_s2s->add_option("--window", o.window, "baseline2 input window in turns");
  train_s2s->add_option("--attention-keys", o.attention_keys, "reduced or concat")
      ->check(CLI::IsMember({"reduced", "concat"}));
  train_s2s->add_option("--context-policy", o.context_policy, "per_turn or per_pair")
      ->check(CLI::IsMember({"per_turn", "per_pair"}));
  train_s2s->add_flag("--include-current", o.include_current, "Let the current utterance into the context");
  add_train_flags(train_s2s, o);

  css::ChatArgs chat;
  std::optional<std::string> chat_da;
  auto* chat_cmd = app.add_subcommand("chat", "Interactive chat on stdin");
  chat_cmd->add_option("--ckpt", chat.ckpt, "Seq2seq checkpoint")->required();
  chat_cmd->add_option("--da-ckpt", chat_da, "Dialogue-act checkpoint");
  chat_cmd->add_flag("--debug", chat.debug, "Print acts, context norm and all beams");
  add_decode_flags(chat_cmd, o);

  css::EvalArgs ev;
  std::optional<std::string> ev_da, out_dir;
  std::vector<std::string> ckpts, scores;
  auto* eval_cmd = app.add_subcommand("eval", "Replay user turns through each model and report metrics");
  eval_cmd->add_option("--transcripts", ev.transcripts, "User turns, blank line between conversations")->required();
  eval_cmd->add_option("--ckpt", ckpts, "Seq2seq checkpoint (repeatable)")->required();
  eval_cmd->add_option("--da-ckpt", ev_da, "Dialogue-act checkpoint");
  eval_cmd->add_option("--specificity-scores", scores, "Scores file per checkpoint, in order");
  eval_cmd->add_option("--report", ev.report, "Report CSV to write")->required();
  eval_cmd->add_option("--out-dir", out_dir, "Directory for filled transcripts");
  add_decode_flags(eval_cmd, o);

  css::ServeArgs sv;
  std::optional<std::string> sv_da;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP JSON chat service");
  serve_cmd->add_option("--ckpt", sv.ckpt, "Seq2seq checkpoint")->required();
  serve_cmd->add_option("--da-ckpt", sv_da, "Dialogue-act checkpoint");
  serve_cmd->add_option("--host", sv.host, "Bind address");
  serve_cmd->add_option("--port", sv.port, "Port");
  add_decode_flags(serve_cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : css::kExitConfig;
  }

  auto config_for = [&](Target t) { return resolve(config_path, o, t); };
  try {
    if (*train_da) {
      if (mapping) da.mapping = *mapping;
      if (history) da.history = *history;
      if (confusion) da.confusion = *confusion;
      return css::cmd_train_da(da, config_for(Target::da), std::cerr);
    }
    if (*train_s2s) {
      if (s2s_da) s2s.da_ckpt = *s2s_da;
      if (loss_csv) s2s.loss_csv = *loss_csv;
      return css::cmd_train_seq2seq(s2s, config_for(Target::seq2seq), std::cerr);
    }
    if (*chat_cmd) {
      if (chat_da) chat.da_ckpt = *chat_da;
      chat.check_config = config_path.has_value();
      return css::cmd_chat(chat, config_for(Target::none), std::cin, std::cout, std::cerr);
    }
    if (*eval_cmd) {
      if (ev_da) ev.da_ckpt = *ev_da;
      if (out_dir) ev.out_dir = *out_dir;
      for (const auto& c : ckpts) ev.ckpts.emplace_back(c);
      for (const auto& s : scores) ev.specificity_scores.emplace_back(s);
      return css::cmd_eval(ev, config_for(Target::none), std::cerr);
    }
    if (*serve_cmd) {
      if (sv_da) sv.da_ckpt = *sv_da;
      return css::cmd_serve(sv, config_for(Target::none), std::cerr);
    }
  } catch (const css::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return css::kExitConfig;
  } catch (const css::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return css::kExitConfig;
  }
  return css::kExitFailure;
}
