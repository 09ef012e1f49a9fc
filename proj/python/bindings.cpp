#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "css/commands.hpp"
#include "css/errors.hpp"
#include "css/metrics.hpp"
#include "css/service.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

css::RunConfig config_of(const std::string& text) { return css::run_config_from_json(json::parse(text)); }

std::optional<css::fs::path> opt_path(const std::optional<std::string>& s) {
  if (!s) return std::nullopt;
  return css::fs::path(*s);
}

css::ResponseSet response_set(std::vector<std::vector<std::string>> responses) {
  return {"python", std::move(responses)};
}

// One chat service over a loaded checkpoint; JSON crosses as text.
class Bot {
 public:
  Bot(const std::string& ckpt, const std::optional<std::string>& da_ckpt, const std::string& config_json) {
    const auto config = config_of(config_json);
    auto bot = css::load_chatbot(ckpt, opt_path(da_ckpt), config, false);
    service_ = std::make_unique<css::ChatService>(std::move(bot), config.generation());
  }
  std::string new_session() { return service_->create_session(); }
  std::string message(const std::string& id, const std::string& body) {
    auto parsed = json::parse(body);
    py::gil_scoped_release release;
    return service_->message(id, parsed).dump();
  }
  std::string transcript(const std::string& id) const { return service_->transcript(id).dump(); }
  std::string classify(const std::string& text) const { return service_->classify(json{{"text", text}}).dump(); }
  std::string health() const { return service_->health().dump(); }

 private:
  std::unique_ptr<css::ChatService> service_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Context-aware seq2seq chatbot core";

  py::register_exception<css::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<css::IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<css::CheckpointError>(m, "CheckpointError", PyExc_ValueError);
  py::register_exception<css::InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<css::ServiceError>(m, "ServiceError", PyExc_RuntimeError);
  py::register_exception<json::exception>(m, "JsonError", PyExc_ValueError);

  m.attr("EXIT_OK") = css::kExitOk;
  m.attr("EXIT_FAILURE") = css::kExitFailure;
  m.attr("EXIT_CONFIG") = css::kExitConfig;
  m.attr("EXIT_CHECKPOINT") = css::kExitCheckpoint;
  m.attr("EXIT_INPUT") = css::kExitInput;

  m.def("tokenize", [](const std::string& t) { return css::tokenize(t); });
  m.def("detokenize", [](const std::vector<std::string>& t) { return css::detokenize(t); });
  m.def("act_names", [] { return std::vector<std::string>(css::kDialogueActNames.begin(), css::kDialogueActNames.end()); });

  m.def("default_config", [] { return css::to_json(css::RunConfig{}).dump(); });
  m.def("resolve_config", [](const std::string& j) { return css::to_json(config_of(j)).dump(); },
        "Overlay a partial JSON config on the defaults; unknown keys raise ConfigError.");

  m.def(
      "train_da",
      [](const std::string& swda, const std::string& out, const std::optional<std::string>& mapping,
         const std::string& config_json) {
        css::TrainDAArgs a;
        a.swda = swda;
        a.out = out;
        a.mapping = opt_path(mapping);
        std::ostringstream log;
        const auto config = config_of(config_json);
        py::gil_scoped_release release;
        const int code = css::cmd_train_da(a, config, log);
        return std::make_pair(code, log.str());
      },
      py::arg("swda"), py::arg("out"), py::arg("mapping") = py::none(), py::arg("config") = "{}");

  m.def(
      "train_seq2seq",
      [](const std::string& lines, const std::string& conversations, const std::string& out,
         const std::optional<std::string>& da_ckpt, const std::string& config_json) {
        css::TrainSeq2SeqArgs a;
        a.lines = lines;
        a.conversations = conversations;
        a.out = out;
        a.da_ckpt = opt_path(da_ckpt);
        std::ostringstream log;
        const auto config = config_of(config_json);
        py::gil_scoped_release release;
        const int code = css::cmd_train_seq2seq(a, config, log);
        return std::make_pair(code, log.str());
      },
      py::arg("lines"), py::arg("conversations"), py::arg("out"), py::arg("da_ckpt") = py::none(),
      py::arg("config") = "{}");

  m.def(
      "evaluate",
      [](const std::string& transcripts, const std::vector<std::string>& ckpts, const std::string& report,
         const std::optional<std::string>& da_ckpt, const std::vector<std::string>& scores,
         const std::optional<std::string>& out_dir, const std::string& config_json) {
        css::EvalArgs a;
        a.transcripts = transcripts;
        for (const auto& c : ckpts) a.ckpts.emplace_back(c);
        for (const auto& s : scores) a.specificity_scores.emplace_back(s);
        a.report = report;
        a.da_ckpt = opt_path(da_ckpt);
        a.out_dir = opt_path(out_dir);
        std::ostringstream log;
        const auto config = config_of(config_json);
        py::gil_scoped_release release;
        const int code = css::cmd_eval(a, config, log);
        return std::make_pair(code, log.str());
      },
      py::arg("transcripts"), py::arg("ckpts"), py::arg("report"), py::arg("da_ckpt") = py::none(),
      py::arg("specificity_scores") = std::vector<std::string>{}, py::arg("out_dir") = py::none(),
      py::arg("config") = "{}");

  m.def("length_stats", [](std::vector<std::vector<std::string>> r) {
    auto s = css::length_stats(response_set(std::move(r)));
    return std::make_pair(s.mean, s.median);
  });
  m.def("diversity", [](std::vector<std::vector<std::string>> r) { return css::diversity(response_set(std::move(r))); });
  m.def("aggregate_specificity", [](const std::vector<double>& scores, std::size_t responses) {
    return css::aggregate_specificity(scores, responses);
  });
  m.def("file_fingerprint", [](const std::string& p) { return css::file_fingerprint(p); });

  py::class_<Bot>(m, "Bot")
      .def(py::init<const std::string&, const std::optional<std::string>&, const std::string&>(), py::arg("ckpt"),
           py::arg("da_ckpt") = py::none(), py::arg("config") = "{}")
      .def("new_session", &Bot::new_session)
      .def("message", &Bot::message)
      .def("transcript", &Bot::transcript)
      .def("classify", &Bot::classify)
      .def("health", &Bot::health);
}
