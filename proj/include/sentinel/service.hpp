#ifndef SENTINEL_SERVICE_HPP
#define SENTINEL_SERVICE_HPP

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "json.hpp"
#include "sentinel/error.hpp"
#include "sentinel/store.hpp"

namespace httplib {
class Server;
}

namespace sentinel {

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

LabelTime system_label_time();

struct ServiceOptions {
  /// Where mutations are persisted. Without it the service is memory-only.
  std::optional<std::filesystem::path> state_dir;
  /// Re-read by POST /api/rules/reload when the request has no body.
  std::optional<std::filesystem::path> rules_path;
  std::function<LabelTime()> clock = system_label_time;
  unsigned threads = 1;
};

class TriageService {
public:
  TriageService(AppState initial, ServiceOptions options);

  /// Loads the state from `options.state_dir`.
  static TriageService open(ServiceOptions options);

  ApiResponse handle(const ApiRequest &request);

  std::shared_ptr<const AppState> snapshot() const;

  /// Routes /api/* to handle(); serves `static_dir` at / when given.
  void mount(httplib::Server &server,
             const std::optional<std::filesystem::path> &static_dir = std::nullopt);

private:
  ApiResponse list_sessions(const ApiRequest &request) const;
  ApiResponse session_detail(const std::string &id) const;
  ApiResponse metrics() const;
  ApiResponse post_label(const nlohmann::json &body);
  ApiResponse post_sample_benign(const nlohmann::json &body);
  ApiResponse post_retrain(const nlohmann::json &body);
  ApiResponse post_reload(const std::string &raw_body);

  void commit(AppState next);

  ServiceOptions options_;
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const AppState> current_;
  std::mutex writer_mutex_;
};

int http_status(ErrorCode code);

} // namespace sentinel

#endif // SENTINEL_SERVICE_HPP
