#include "hred/http_service.hpp"

#include <httplib.h>

#include <cstdio>
#include <string_view>

namespace hred {

using nlohmann::json;

namespace {

ApiResponse error(int status, const std::string& message) { return {status, json{{"error", message}}}; }

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  json j = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw std::invalid_argument("request body is not valid JSON");
  if (!j.is_object()) throw std::invalid_argument("request body must be a JSON object");
  return j;
}

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = i;
    while (j < path.size() && path[j] != '/') ++j;
    if (j > i) parts.push_back(path.substr(i, j - i));
    i = j;
  }
  return parts;
}

}  // namespace

json settings_to_json(const DecodeSettings& s) {
  return json{{"mode", decode_mode_name(s.mode)},
              {"width", s.width},
              {"temperature", s.temperature},
              {"seed", s.seed},
              {"max_length", s.max_length}};
}

DecodeSettings settings_from_json(const json& j, const DecodeSettings& base) {
  if (!j.is_object()) throw std::invalid_argument("settings must be a JSON object");
  DecodeSettings s = base;
  for (const auto& [key, value] : j.items()) {
    auto need_uint = [&] {
      const bool ok = value.is_number_unsigned() || (value.is_number_integer() && value.get<std::int64_t>() >= 0);
      if (!ok) throw std::invalid_argument("settings." + key + " must be a non-negative integer");
      return value.get<std::uint64_t>();
    };
    if (key == "mode") {
      if (!value.is_string()) throw std::invalid_argument("settings.mode must be a string");
      s.mode = parse_decode_mode(value.get<std::string>());
    } else if (key == "width") {
      s.width = need_uint();
    } else if (key == "temperature") {
      if (!value.is_number()) throw std::invalid_argument("settings.temperature must be a number");
      s.temperature = value.get<double>();
    } else if (key == "seed") {
      s.seed = need_uint();
    } else if (key == "max_length") {
      s.max_length = need_uint();
    } else {
      throw std::invalid_argument("unknown settings field '" + key + "'");
    }
  }
  s.validate();
  return s;
}

HttpApi::HttpApi(std::shared_ptr<SessionManager> sessions) : sessions_(std::move(sessions)) {
  if (!sessions_) throw std::invalid_argument("HttpApi needs a session manager");
}

ApiResponse HttpApi::handle(const std::string& method, const std::string& path, const std::string& body) {
  const auto parts = split_path(path);
  try {
    if (parts.size() == 1 && parts[0] == "healthz") {
      if (method != "GET") return error(405, "use GET");
      return health();
    }
    if (parts.size() == 1 && parts[0] == "model") {
      if (method != "GET") return error(405, "use GET");
      return model_info();
    }
    if (parts.size() == 1 && parts[0] == "sessions") {
      if (method != "POST") return error(405, "use POST");
      return create_session(body);
    }
    if (parts.size() == 2 && parts[0] == "sessions") {
      if (method != "DELETE") return error(405, "use DELETE");
      return remove(std::string(parts[1]));
    }
    if (parts.size() == 3 && parts[0] == "sessions" && parts[2] == "turns") {
      if (method != "POST") return error(405, "use POST");
      return chat(std::string(parts[1]), body);
    }
    return error(404, "no route for " + method + " " + path);
  } catch (const SessionNotFound& e) {
    return error(404, e.what());
  } catch (const std::invalid_argument& e) {
    return error(400, e.what());
  } catch (const json::exception& e) {
    return error(400, e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

ApiResponse HttpApi::create_session(const std::string& body) {
  const json req = parse_body(body);
  DecodeSettings settings;
  for (const auto& [key, value] : req.items()) {
    if (key != "settings") throw std::invalid_argument("unknown field '" + key + "'");
    settings = settings_from_json(value);
  }
  const std::string id = sessions_->create(settings);
  return {201, json{{"session_id", id}, {"settings", settings_to_json(settings)}}};
}

ApiResponse HttpApi::chat(const std::string& id, const std::string& body) {
  const json req = parse_body(body);
  std::optional<std::string> utterance;
  std::optional<DecodeSettings> override;
  for (const auto& [key, value] : req.items()) {
    if (key == "utterance") {
      if (!value.is_string()) throw std::invalid_argument("utterance must be a string");
      utterance = value.get<std::string>();
    } else if (key == "settings") {
      override = settings_from_json(value, sessions_->settings(id));
    } else if (key != "session_id") {
      throw std::invalid_argument("unknown field '" + key + "'");
    } else if (!value.is_string() || value.get<std::string>() != id) {
      throw std::invalid_argument("session_id in the body does not match the path");
    }
  }
  if (!utterance) throw std::invalid_argument("missing field 'utterance'");
  const ChatResponse r = sessions_->chat_turn(id, *utterance, override);
  return {200, json{{"session_id", id},
                    {"response", r.text},
                    {"token_ids", r.token_ids},
                    {"log_prob", r.log_prob},
                    {"turn", r.turn}}};
}

ApiResponse HttpApi::remove(const std::string& id) {
  if (!sessions_->remove(id)) throw SessionNotFound(id);
  return {204, nullptr};
}

ApiResponse HttpApi::health() const {
  return {200, json{{"status", "ok"}, {"sessions", sessions_->size()}}};
}

ApiResponse HttpApi::model_info() const {
  const ModelConfig& c = sessions_->model().config();
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(c.vocab_hash));
  json j{{"variant", variant_name(c.variant)},
         {"vocab_size", c.vocab_size},
         {"embed_dim", c.embed_dim},
         {"hidden_dim", c.hidden_dim},
         {"context_dim", c.context_dim},
         {"maxout_pieces", c.maxout_pieces},
         {"vocab_hash", hash}};
  j["summary"] = c.variant == Variant::HredBi ? json(summary_name(c.summary)) : json(nullptr);
  return {200, j};
}

void install_routes(httplib::Server& server, std::shared_ptr<HttpApi> api) {
  auto handler = [api](const httplib::Request& req, httplib::Response& res) {
    api->sessions().evict_idle();
    const ApiResponse r = api->handle(req.method, req.path, req.body);
    res.status = r.status;
    if (r.status != 204) res.set_content(r.body.dump(), "application/json");
  };
  const std::string any = R"(/.*)";
  server.Get(any, handler);
  server.Post(any, handler);
  server.Delete(any, handler);
  server.Put(any, handler);
  server.Patch(any, handler);
}

}  // namespace hred
