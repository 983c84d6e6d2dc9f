#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "hred/session.hpp"

namespace httplib {
class Server;
}

namespace hred {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;  // null for 204
};

/// JSON API over a SessionManager, independent of the transport.
///
///   POST   /sessions            {settings?}             -> 201 {session_id, settings}
///   POST   /sessions/{id}/turns {utterance, settings?}  -> 200 {session_id, response, token_ids, log_prob, turn}
///   DELETE /sessions/{id}                               -> 204
///   GET    /healthz                                     -> 200 {status, sessions}
///   GET    /model                                       -> 200 {variant, summary, vocab_size, embed_dim, ...}
///
/// Errors are {"error": message} with 400 (bad request), 404 (unknown
/// session or route) or 405 (wrong method).
class HttpApi {
 public:
  explicit HttpApi(std::shared_ptr<SessionManager> sessions);

  ApiResponse handle(const std::string& method, const std::string& path, const std::string& body);

  SessionManager& sessions() { return *sessions_; }

 private:
  ApiResponse create_session(const std::string& body);
  ApiResponse chat(const std::string& id, const std::string& body);
  ApiResponse remove(const std::string& id);
  ApiResponse health() const;
  ApiResponse model_info() const;

  std::shared_ptr<SessionManager> sessions_;
};

nlohmann::json settings_to_json(const DecodeSettings& s);
/// Fields missing from `j` keep their value from `base`. Throws
/// std::invalid_argument on wrong types, unknown keys or invalid values.
DecodeSettings settings_from_json(const nlohmann::json& j, const DecodeSettings& base = {});

/// Registers the API routes on `server`; idle sessions are evicted before
/// each request.
void install_routes(httplib::Server& server, std::shared_ptr<HttpApi> api);

}  // namespace hred
