#include "css/service.hpp"

#include <chrono>
#include <cstdio>
#include <random>

#include "css/errors.hpp"
#include "httplib.h"

namespace css {

using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

json act_json(const std::optional<DialogueAct>& act, const std::vector<float>& probs) {
  if (!act) return nullptr;
  return {{"label", act_name(*act)}, {"probs", probs}};
}

const json& require_object(const json& body) {
  if (!body.is_object()) throw ServiceError(400, "request body must be a JSON object");
  return body;
}

std::string require_text(const json& body) {
  require_object(body);
  if (!body.contains("text") || !body["text"].is_string()) throw ServiceError(400, "field 'text' must be a string");
  return body["text"].get<std::string>();
}

}  // namespace

ChatService::ChatService(std::shared_ptr<const Chatbot> bot, GenerationOptions defaults)
    : bot_(std::move(bot)), defaults_(defaults) {
  std::random_device rd;
  salt_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^
          static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
}

std::string ChatService::create_session() {
  std::lock_guard lock(mu_);
  std::string id;
  do {
    id = hex64(mix(salt_ ^ mix(++counter_)));
  } while (sessions_.count(id));
  sessions_.emplace(id, std::make_shared<Session>(bot_->new_state()));
  return id;
}

std::shared_ptr<ChatService::Session> ChatService::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session '" + id + "'");
  return it->second;
}

std::size_t ChatService::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

GenerationOptions ChatService::resolve(const json& body) const {
  GenerationOptions g = defaults_;
  if (!body.contains("decode")) return g;
  const auto& d = body["decode"];
  if (!d.is_object()) throw ServiceError(400, "field 'decode' must be an object");
  for (const auto& [k, v] : d.items()) {
    if (k == "method" && v.is_string()) {
      try {
        g.method = parse_decode_method(v.get<std::string>());
      } catch (const ConfigError& e) {
        throw ServiceError(400, e.what());
      }
    } else if (k == "beam_width" && v.is_number_unsigned()) {
      g.beam.width = v.get<std::size_t>();
    } else if (k == "chosen_beam" && v.is_number_unsigned()) {
      g.beam.chosen_beam = v.get<std::size_t>();
    } else if (k == "length_penalty" && v.is_number()) {
      g.beam.length_penalty = v.get<double>();
    } else {
      throw ServiceError(400, "bad decode setting '" + k + "'");
    }
  }
  if (g.beam.width == 0 || g.beam.width > 100 || g.beam.chosen_beam == 0 || g.beam.chosen_beam > g.beam.width) {
    throw ServiceError(400, "decode needs 1 <= chosen_beam <= beam_width <= 100");
  }
  return g;
}

json ChatService::message(const std::string& session_id, const json& body) {
  auto text = require_text(body);
  auto gen = resolve(body);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw ServiceError(400, "empty message");
  auto session = find(session_id);

  std::lock_guard lock(session->mu);
  auto reply = bot_->respond(session->state, std::move(text), gen);
  const auto& turns = session->state.turns();
  const auto& user = turns[turns.size() - 2];
  json beams = json::array();
  for (const auto& b : reply.beams) beams.push_back({{"text", b.text}, {"logprob", b.logprob}, {"score", b.score}});
  return {{"response", reply.text},
          {"user_act", act_json(user.act, user.act_probs)},
          {"beams", beams},
          {"chosen_beam", reply.chosen + 1},
          {"context_norm", reply.context_norm}};
}

json ChatService::transcript(const std::string& session_id) const {
  auto session = find(session_id);
  std::lock_guard lock(session->mu);
  return {{"session_id", session_id}, {"turns", transcript_json(session->state)}};
}

json ChatService::classify(const json& body) const {
  auto text = require_text(body);
  const auto* c = bot_->classifier();
  if (!c) throw ServiceError(503, "no dialogue-act model loaded");
  auto p = c->classify(text);
  return {{"act", act_name(p.act)}, {"probs", p.probs}};
}

json ChatService::health() const {
  return {{"status", "ok"},
          {"model_mode", mode_name(bot_->mode())},
          {"classifier", bot_->classifier() != nullptr},
          {"decode",
           {{"method", decode_method_name(defaults_.method)},
            {"beam_width", defaults_.beam.width},
            {"chosen_beam", defaults_.beam.chosen_beam},
            {"length_penalty", defaults_.beam.length_penalty}}}};
}

// ---------------------------------------------------------------------------

namespace {

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    send(res, 200, f());
  } catch (const ServiceError& e) {
    send(res, e.status(), {{"error", e.what()}});
  } catch (const json::exception& e) {
    send(res, 400, {{"error", std::string("malformed JSON: ") + e.what()}});
  } catch (const std::exception& e) {
    send(res, 500, {{"error", e.what()}});
  }
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ServiceError(400, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

void mount_routes(httplib::Server& server, ChatService& service) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/v1/session", [&service](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { return json{{"session_id", service.create_session()}}; });
  });
  server.Post(R"(/v1/session/([^/]+)/message)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return service.message(req.matches[1], parse_body(req)); });
  });
  server.Get(R"(/v1/session/([^/]+)/transcript)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return service.transcript(req.matches[1]); });
  });
  server.Post("/v1/classify", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return service.classify(parse_body(req)); });
  });
  server.Get("/v1/health", [&service](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { return service.health(); });
  });
}

}  // namespace css
