#pragma once

#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "css/chatbot.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace css {

/// Maps to an HTTP status in the routes.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// Chat sessions over one shared, read-only Chatbot. Requests to the same
/// session run one at a time; different sessions proceed in parallel.
class ChatService {
 public:
  ChatService(std::shared_ptr<const Chatbot> bot, GenerationOptions defaults);

  std::string create_session();

  /// Body `{"text": string, "decode"?: {...}}`. The optional decode object
  /// overrides `method`, `beam_width`, `chosen_beam`, `length_penalty` for
  /// this message only.
  nlohmann::json message(const std::string& session_id, const nlohmann::json& body);
  nlohmann::json transcript(const std::string& session_id) const;
  nlohmann::json classify(const nlohmann::json& body) const;
  nlohmann::json health() const;

  std::size_t session_count() const;

 private:
  struct Session {
    std::mutex mu;
    DialogueState state;
    explicit Session(DialogueState s) : state(std::move(s)) {}
  };
  std::shared_ptr<Session> find(const std::string& id) const;
  GenerationOptions resolve(const nlohmann::json& body) const;

  std::shared_ptr<const Chatbot> bot_;
  GenerationOptions defaults_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
  std::uint64_t salt_ = 0;
};

/// Registers the /v1 routes. JSON errors are `{"error": message}`.
void mount_routes(httplib::Server& server, ChatService& service);

}  // namespace css
