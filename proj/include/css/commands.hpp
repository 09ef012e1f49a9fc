#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "css/run_config.hpp"

namespace css {

namespace fs = std::filesystem;

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;  // bad flags, config or paths
inline constexpr int kExitCheckpoint = 3;
inline constexpr int kExitInput = 4;

struct TrainDAArgs {
  fs::path swda;
  std::optional<fs::path> mapping;  // shipped table when absent
  fs::path out;
  std::optional<fs::path> history;    // default: <out>.history.csv
  std::optional<fs::path> confusion;  // default: <out>.confusion.csv
};

struct TrainSeq2SeqArgs {
  fs::path lines;
  fs::path conversations;
  std::optional<fs::path> da_ckpt;
  fs::path out;
  std::optional<fs::path> loss_csv;  // default: <out>.loss.csv
};

struct ChatArgs {
  fs::path ckpt;
  std::optional<fs::path> da_ckpt;
  bool debug = false;
  bool check_config = false;  // compare model dims with the run config
};

struct EvalArgs {
  fs::path transcripts;
  std::vector<fs::path> ckpts;
  std::optional<fs::path> da_ckpt;
  std::vector<fs::path> specificity_scores;  // none, or one per checkpoint
  fs::path report;
  std::optional<fs::path> out_dir;  // filled transcripts, one file per model
};

struct ServeArgs {
  fs::path ckpt;
  std::optional<fs::path> da_ckpt;
  std::string host = "127.0.0.1";
  int port = 8080;
};

/// Null when `path` is empty.
std::shared_ptr<const ActClassifier> load_classifier(const std::optional<fs::path>& path);

/// Loads a generator and, when given, the act model; css checkpoints require
/// the act model they were trained with. With `check_config` the stored
/// dimensions must match `config`.
std::shared_ptr<const Chatbot> load_chatbot(const fs::path& ckpt, const std::optional<fs::path>& da_ckpt,
                                            const RunConfig& config, bool check_config);

int cmd_train_da(const TrainDAArgs& args, const RunConfig& config, std::ostream& log);
int cmd_train_seq2seq(const TrainSeq2SeqArgs& args, const RunConfig& config, std::ostream& log);
int cmd_chat(const ChatArgs& args, const RunConfig& config, std::istream& in, std::ostream& out, std::ostream& log);
int cmd_eval(const EvalArgs& args, const RunConfig& config, std::ostream& log);
int cmd_serve(const ServeArgs& args, const RunConfig& config, std::ostream& log);

/// 64-bit FNV-1a over a file's bytes, as 16 hex digits.
std::string file_fingerprint(const fs::path& path);

}  // namespace css
