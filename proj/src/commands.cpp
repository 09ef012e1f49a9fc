#include "css/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include "css/checkpoint.hpp"
#include "css/corpus.hpp"
#include "css/errors.hpp"
#include "css/metrics.hpp"
#include "css/service.hpp"
#include "httplib.h"

namespace css {

using nlohmann::json;

namespace {

template <typename F>
int guarded(std::ostream& log, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CheckpointError& e) {
    log << "error: " << e.what() << '\n';
    return kExitCheckpoint;
  } catch (const InputError& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) { return fs::path(p.string() + suffix); }

// Conversation-level split so no conversation feeds both sides.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double fraction,
                                                                            std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) throw ConfigError("validation_fraction must be in [0, 1)");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed ^ 0x5A17DA7AULL);
  rng.shuffle(idx);
  std::size_t n_val = static_cast<std::size_t>(fraction * static_cast<double>(n));
  if (n_val >= n) n_val = n > 0 ? n - 1 : 0;
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {train, val};
}

}  // namespace

std::shared_ptr<const ActClassifier> load_classifier(const std::optional<fs::path>& path) {
  if (!path) return nullptr;
  auto loaded = load_da(load_checkpoint(*path));
  return std::make_shared<const ActClassifier>(std::move(loaded.model), std::move(loaded.vocab));
}

std::shared_ptr<const Chatbot> load_chatbot(const fs::path& ckpt, const std::optional<fs::path>& da_ckpt,
                                            const RunConfig& config, bool check_config) {
  auto ck = load_checkpoint(ckpt);
  auto classifier = load_classifier(da_ckpt);
  std::optional<Seq2SeqConfig> expected;
  if (check_config) {
    const auto stored = seq2seq_config_from_json(ck.config);
    expected = config.seq2seq_config(stored.vocab_size, stored.context_dim);
  }
  auto loaded = load_seq2seq(ck, expected ? &*expected : nullptr);
  if (loaded.model.config().mode == ModelMode::css) {
    if (!classifier) throw ConfigError("css model " + ckpt.string() + " needs --da-ckpt");
    const auto fp = file_fingerprint(*da_ckpt);
    if (!loaded.da_fingerprint.empty() && loaded.da_fingerprint != fp) {
      throw CheckpointError(ckpt.string() + " was trained with a different dialogue-act checkpoint than " +
                            da_ckpt->string());
    }
  }
  return std::make_shared<const Chatbot>(std::move(loaded.model), std::move(loaded.vocab), std::move(classifier),
                                         loaded.chat);
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

std::string file_fingerprint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::uint64_t h = 0xCBF29CE484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001B3ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

// ---------------------------------------------------------------------------

int cmd_train_da(const TrainDAArgs& args, const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    TagMapping mapping = TagMapping::defaults();
    if (args.mapping) {
      if (!fs::exists(*args.mapping)) throw IoError("mapping file not found: " + args.mapping->string());
      mapping = TagMapping::load(*args.mapping);
    }
    SwdaOptions opts;
    opts.act_column = config.data.act_column;
    opts.text_column = config.data.text_column;
    auto corpus = parse_swda(args.swda, opts);
    if (corpus.utterances.empty()) throw InputError("no utterances found under " + args.swda.string());

    std::map<std::string, std::size_t> conv_index;
    std::vector<std::vector<std::size_t>> convs;
    for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
      auto [it, fresh] = conv_index.emplace(corpus.utterances[i].conversation, convs.size());
      if (fresh) convs.emplace_back();
      convs[it->second].push_back(i);
    }
    auto [train_c, val_c] = split_indices(convs.size(), config.data.validation_fraction, config.seed);

    std::vector<std::vector<std::string>> train_tokens;
    for (auto c : train_c) {
      for (auto i : convs[c]) train_tokens.push_back(corpus.utterances[i].tokens);
    }
    auto vocab = Vocabulary::build(train_tokens, config.data.vocab_size);
    auto model_config = config.da_config(vocab.size());

    auto examples = [&](const std::vector<std::size_t>& which) {
      std::vector<DAExample> out;
      for (auto c : which) {
        for (auto i : convs[c]) {
          const auto& u = corpus.utterances[i];
          out.push_back({encode(vocab, u.tokens, model_config.max_len).ids,
                         static_cast<int>(act_index(mapping.condense(u.act_tag)))});
        }
      }
      return out;
    };
    const auto train = examples(train_c);
    const auto val = examples(val_c);
    log << "train-da: " << corpus.utterances.size() << " utterances (" << corpus.skipped_rows << " rows skipped), "
        << train.size() << " train / " << val.size() << " validation, vocab " << vocab.size() << ", seed "
        << config.seed << '\n';

    DAEncoder<float> model(model_config);
    Rng init(config.seed);
    model.initialize(init);
    auto history = train_da(model, train, val, config.da_train());
    for (const auto& r : history) {
      log << "epoch " << r.epoch << ' ' << r.split << " loss " << fmt("%.4f", r.loss) << " acc "
          << fmt("%.4f", r.accuracy) << '\n';
    }
    auto eval = evaluate_da(model, val.empty() ? std::span<const DAExample>(train) : std::span<const DAExample>(val));

    save_checkpoint(args.out, make_checkpoint(model, vocab, to_json(config)));
    {
      auto out = open_out(args.history.value_or(with_suffix(args.out, ".history.csv")));
      write_da_history_csv(out, history);
    }
    {
      auto out = open_out(args.confusion.value_or(with_suffix(args.out, ".confusion.csv")));
      eval.confusion.write_csv(out);
    }
    log << "wrote " << args.out.string() << " (" << (val.empty() ? "train" : "validation") << " accuracy "
        << fmt("%.4f", eval.accuracy()) << ")\n";
    return kExitOk;
  });
}

int cmd_train_seq2seq(const TrainSeq2SeqArgs& args, const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    const auto mode = parse_mode(config.seq2seq.mode);
    if (mode == ModelMode::css && !args.da_ckpt) throw ConfigError("--mode css requires --da-ckpt");
    auto corpus = parse_cornell(args.lines, args.conversations);
    if (corpus.pairs.empty()) throw InputError("no utterance pairs in " + args.lines.string());
    auto classifier = load_classifier(args.da_ckpt);

    auto [train_c, val_c] = split_indices(corpus.conversations.size(), config.data.validation_fraction, config.seed);
    std::vector<Conversation> train_convs, val_convs;
    for (auto c : train_c) train_convs.push_back(corpus.conversations[c]);
    for (auto c : val_c) val_convs.push_back(corpus.conversations[c]);

    std::vector<std::vector<std::string>> train_tokens;
    for (const auto& c : train_convs) {
      for (const auto& line : c.turns) train_tokens.push_back(tokenize(line));
    }
    const std::vector<std::string> extra{std::string(kSepToken)};
    auto vocab = Vocabulary::build(train_tokens, config.data.vocab_size, extra);
    const std::size_t ctx_dim = classifier ? classifier->context_dim() : config.da.hidden_dim;
    auto model_config = config.seq2seq_config(vocab.size(), ctx_dim);
    const auto chat = config.chat_options();

    auto train = build_training_pairs(train_convs, vocab, model_config, classifier.get(), chat);
    auto val = build_training_pairs(val_convs, vocab, model_config, classifier.get(), chat);
    log << "train-seq2seq: mode " << mode_name(mode) << ", " << train.size() << " train / " << val.size()
        << " validation pairs, vocab " << vocab.size() << ", seed " << config.seed << '\n';

    Seq2Seq<float> model(model_config);
    Rng init(config.seed);
    model.initialize(init);
    auto rows = train_seq2seq(model, train, val, config.seq2seq_train());
    for (const auto& r : rows) log << "epoch " << r.epoch << ' ' << r.split << " loss " << fmt("%.4f", r.loss) << '\n';

    const std::string fp = args.da_ckpt && mode == ModelMode::css ? file_fingerprint(*args.da_ckpt) : std::string();
    save_checkpoint(args.out, make_checkpoint(model, vocab, chat, to_json(config), fp));
    auto out = open_out(args.loss_csv.value_or(with_suffix(args.out, ".loss.csv")));
    write_loss_csv(out, rows);
    log << "wrote " << args.out.string() << '\n';
    return kExitOk;
  });
}

int cmd_chat(const ChatArgs& args, const RunConfig& config, std::istream& in, std::ostream& out, std::ostream& log) {
  return guarded(log, [&] {
    auto bot = load_chatbot(args.ckpt, args.da_ckpt, config, args.check_config);
    const auto gen = config.generation();
    auto state = bot->new_state();
    out << "mode " << mode_name(bot->mode()) << ", " << decode_method_name(gen.method);
    if (gen.method == DecodeMethod::beam) out << " width " << gen.beam.width << " chosen " << gen.beam.chosen_beam;
    out << ". /reset clears the conversation, /quit exits.\n";
    std::string line;
    while (true) {
      out << "> " << std::flush;
      if (!std::getline(in, line)) break;
      const auto b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      line = line.substr(b, line.find_last_not_of(" \t\r") - b + 1);
      if (line == "/quit") break;
      if (line == "/reset") {
        state.reset();
        out << "(conversation reset)\n";
        continue;
      }
      auto reply = bot->respond(state, line, gen);
      out << "bot: " << reply.text << '\n';
      if (args.debug) {
        const auto& user = state.turns()[state.size() - 2];
        if (user.act) {
          const auto p = user.act_probs[act_index(*user.act)];
          out << "  user act: " << act_name(*user.act) << " (" << fmt("%.3f", p) << ")\n";
        } else {
          out << "  user act: n/a\n";
        }
        out << "  context norm: " << fmt("%.4f", reply.context_norm) << '\n';
        for (std::size_t i = 0; i < reply.beams.size(); ++i) {
          const auto& bm = reply.beams[i];
          out << (i == reply.chosen ? "  * " : "    ") << '[' << i + 1 << "] logprob " << fmt("%.4f", bm.logprob)
              << " score " << fmt("%.4f", bm.score) << "  " << bm.text << '\n';
        }
      }
    }
    return kExitOk;
  });
}

int cmd_eval(const EvalArgs& args, const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    if (args.ckpts.empty()) throw ConfigError("eval needs at least one --ckpt");
    if (!args.specificity_scores.empty() && args.specificity_scores.size() != args.ckpts.size()) {
      throw ConfigError("give one --specificity-scores file per --ckpt");
    }
    auto convs = read_user_turns(args.transcripts);
    if (convs.empty()) throw InputError("transcript file " + args.transcripts.string() + " has no conversations");
    const auto gen = config.generation();
    if (args.out_dir) fs::create_directories(*args.out_dir);

    std::vector<MetricsReport> rows;
    for (std::size_t m = 0; m < args.ckpts.size(); ++m) {
      const auto& path = args.ckpts[m];
      auto bot = load_chatbot(path, args.da_ckpt, config, false);
      const std::string name = path.stem().string();
      auto result = replay_transcripts(convs, *bot, gen, name);
      if (result.skipped) log << "warning: skipped " << result.skipped << " empty conversations\n";
      std::optional<std::vector<double>> scores;
      if (!args.specificity_scores.empty()) scores = read_scores(args.specificity_scores[m]);
      rows.push_back(scores ? make_report(result.responses, std::span<const double>(*scores))
                            : make_report(result.responses));
      log << name << ": " << result.responses.responses.size() << " responses\n";
      if (args.out_dir) {
        auto out = open_out(*args.out_dir / (name + ".transcript.txt"));
        write_transcripts(out, result.transcripts);
      }
    }
    auto out = open_out(args.report);
    write_report_csv(out, rows);
    return kExitOk;
  });
}

int cmd_serve(const ServeArgs& args, const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    auto bot = load_chatbot(args.ckpt, args.da_ckpt, config, false);
    ChatService service(bot, config.generation());
    httplib::Server server;
    mount_routes(server, service);
    log << "serving " << mode_name(bot->mode()) << " model on http://" << args.host << ':' << args.port << '\n';
    log.flush();
    if (!server.listen(args.host, args.port)) {
      throw IoError("cannot listen on " + args.host + ":" + std::to_string(args.port));
    }
    return kExitOk;
  });
}

}  // namespace css
