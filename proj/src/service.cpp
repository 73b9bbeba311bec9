#include "sentinel/service.hpp"

#include <charconv>

#include "httplib.h"
#include "sentinel/error.hpp"

namespace sentinel {

using nlohmann::json;

namespace {

constexpr std::size_t kDefaultPageSize = 50;
constexpr std::size_t kMaxPageSize = 1000;

ApiResponse error_response(int status, std::string_view error, std::string_view detail) {
  return {status, json{{"error", error}, {"detail", detail}}};
}

std::size_t query_size(const ApiRequest &request, const std::string &name,
                       std::size_t fallback) {
  auto it = request.query.find(name);
  if (it == request.query.end())
    return fallback;
  const std::string &text = it->second;
  std::size_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty())
    throw Error(ErrorCode::invalid_argument, name);
  return value;
}

json parse_body(const std::string &body) {
  if (body.empty())
    return json::object();
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    throw Error(ErrorCode::invalid_format, "request body must be a JSON object");
  return doc;
}

json summary_row_to_json(const SessionSummaryRow &row) {
  return json{{"session_id", row.session_id}, {"country", row.country},
              {"city", row.city},             {"date", row.date.iso()},
              {"length", row.length},         {"rule_ids", row.rule_ids},
              {"score", row.score}};
}

json detection_summary(const DetectionReport &report) {
  return json{{"total_sessions", report.total_sessions},
              {"flagged_sessions", report.flagged_sessions},
              {"fraction", report.fraction}};
}

} // namespace

LabelTime system_label_time() {
  return std::chrono::floor<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

int http_status(ErrorCode code) {
  switch (code) {
  case ErrorCode::unknown_session_id:
    return 404;
  case ErrorCode::insufficient_labels:
    return 409;
  case ErrorCode::io_failure:
  case ErrorCode::corrupt_state:
    return 500;
  default:
    return 400;
  }
}

TriageService::TriageService(AppState initial, ServiceOptions options)
    : options_(std::move(options)),
      current_(std::make_shared<const AppState>(std::move(initial))) {}

TriageService TriageService::open(ServiceOptions options) {
  if (!options.state_dir)
    throw Error(ErrorCode::invalid_argument, "state directory required");
  AppState state = load_state(*options.state_dir);
  return TriageService(std::move(state), std::move(options));
}

std::shared_ptr<const AppState> TriageService::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return current_;
}

void TriageService::commit(AppState next) {
  if (options_.state_dir)
    save_state(next, *options_.state_dir);
  auto fresh = std::make_shared<const AppState>(std::move(next));
  std::lock_guard lock(snapshot_mutex_);
  current_ = std::move(fresh);
}

ApiResponse TriageService::handle(const ApiRequest &request) {
  static const std::string kSessionPrefix = "/api/sessions/";
  try {
    const std::string &path = request.path;
    if (request.method == "GET") {
      if (path == "/api/sessions")
        return list_sessions(request);
      if (path.starts_with(kSessionPrefix) && path.size() > kSessionPrefix.size())
        return session_detail(path.substr(kSessionPrefix.size()));
      if (path == "/api/metrics")
        return metrics();
    } else if (request.method == "POST") {
      if (path == "/api/labels")
        return post_label(parse_body(request.body));
      if (path == "/api/labels/sample_benign")
        return post_sample_benign(parse_body(request.body));
      if (path == "/api/retrain")
        return post_retrain(parse_body(request.body));
      if (path == "/api/rules/reload")
        return post_reload(request.body);
    }
    return error_response(404, "NotFound", request.method + " " + path);
  } catch (const Error &e) {
    return error_response(http_status(e.code()), to_string(e.code()), e.detail());
  } catch (const json::exception &e) {
    return error_response(400, to_string(ErrorCode::invalid_format), e.what());
  } catch (const std::exception &e) {
    return error_response(500, "Internal", e.what());
  }
}

ApiResponse TriageService::list_sessions(const ApiRequest &request) const {
  SessionFilter filter = SessionFilter::all;
  if (auto it = request.query.find("status"); it != request.query.end()) {
    auto parsed = parse_session_filter(it->second);
    if (!parsed)
      throw Error(ErrorCode::invalid_argument, "status");
    filter = *parsed;
  }
  if (auto it = request.query.find("sort"); it != request.query.end() && it->second != "score")
    throw Error(ErrorCode::invalid_argument, "sort");
  const std::size_t offset = query_size(request, "offset", 0);
  const std::size_t limit = query_size(request, "limit", kDefaultPageSize);
  if (limit == 0 || limit > kMaxPageSize)
    throw Error(ErrorCode::invalid_argument, "limit");

  const auto state = snapshot();
  const auto rows = rank_sessions(*state, filter);
  json items = json::array();
  for (std::size_t i = offset; i < rows.size() && i < offset + limit; ++i)
    items.push_back(summary_row_to_json(rows[i]));
  return {200, json{{"total", rows.size()},
                    {"offset", offset},
                    {"limit", limit},
                    {"items", std::move(items)}}};
}

ApiResponse TriageService::session_detail(const std::string &id) const {
  const auto state = snapshot();
  const UserSession *session = state->find_session(id);
  if (!session)
    throw Error(ErrorCode::unknown_session_id, id);

  json body = session_to_json(*session);
  body["length"] = session->length();
  body["start_time"] = session->start_time.iso();
  body["end_time"] = session->end_time.iso();
  json matches = json::array();
  for (const auto &m : state->detection.matches)
    if (m.session_id == id)
      matches.push_back(rule_match_to_json(m));
  body["matches"] = std::move(matches);

  const auto labels = state->effective_labels();
  auto label = labels.find(id);
  body["label"] = label == labels.end() ? json(nullptr) : label_to_json(label->second);
  body["score"] = nullptr;
  for (const auto &row : rank_sessions(*state, SessionFilter::all))
    if (row.session_id == id)
      body["score"] = row.score;
  return {200, std::move(body)};
}

ApiResponse TriageService::metrics() const {
  const auto state = snapshot();
  std::size_t counts[2] = {0, 0};
  for (const auto &[_, label] : state->effective_label_values())
    ++counts[static_cast<int>(label)];
  json body;
  body["cv_report"] = state->cv_report ? cv_report_to_json(*state->cv_report) : json(nullptr);
  body["detection"] = detection_summary(state->detection);
  body["labels"] = json{{"benign", counts[0]},
                        {"suspicious", counts[1]},
                        {"history", state->label_history.size()}};
  if (state->model)
    body["model"] = json{{"kind", to_string(state->model->kind)},
                         {"dimension", state->model->dimension()},
                         {"vocabulary_digest", state->model->vocabulary_digest}};
  else
    body["model"] = nullptr;
  return {200, std::move(body)};
}

ApiResponse TriageService::post_label(const json &body) {
  if (!body.contains("session_id") || !body["session_id"].is_string())
    throw Error(ErrorCode::invalid_argument, "session_id");
  if (!body.contains("label") || !body["label"].is_string())
    throw Error(ErrorCode::invalid_argument, "label");
  auto label = parse_label(body["label"].get<std::string>());
  if (!label)
    throw Error(ErrorCode::invalid_argument, "label");
  std::string labeler = "analyst";
  if (body.contains("labeler")) {
    if (!body["labeler"].is_string() || body["labeler"].get<std::string>().empty())
      throw Error(ErrorCode::invalid_argument, "labeler");
    labeler = body["labeler"].get<std::string>();
  }
  const std::string id = body["session_id"].get<std::string>();

  std::lock_guard writer(writer_mutex_);
  AppState next = apply_label(*snapshot(), LabelRecord{id, *label, labeler, options_.clock()});
  json effective = label_to_json(next.effective_labels().at(id));
  commit(std::move(next));
  return {200, std::move(effective)};
}

ApiResponse TriageService::post_sample_benign(const json &body) {
  if (!body.contains("n") || !body["n"].is_number_unsigned())
    throw Error(ErrorCode::invalid_argument, "n");
  std::uint64_t seed = 0;
  if (body.contains("seed")) {
    if (!body["seed"].is_number_unsigned())
      throw Error(ErrorCode::invalid_argument, "seed");
    seed = body["seed"].get<std::uint64_t>();
  }
  std::lock_guard writer(writer_mutex_);
  AppState next = *snapshot();
  const std::size_t added =
      sample_benign(next, body["n"].get<std::size_t>(), seed, options_.clock());
  commit(std::move(next));
  return {200, json{{"labeled", added}}};
}

ApiResponse TriageService::post_retrain(const json &body) {
  if (!body.contains("kind") || !body["kind"].is_string())
    throw Error(ErrorCode::invalid_argument, "kind");
  auto kind = parse_model_kind(body["kind"].get<std::string>());
  if (!kind)
    throw Error(ErrorCode::invalid_argument, "kind");
  Hyper hyper;
  if (body.contains("hyper"))
    hyper = hyper_from_json(body["hyper"]);
  hyper.validate();
  std::size_t folds = 5;
  if (body.contains("folds")) {
    if (!body["folds"].is_number_unsigned())
      throw Error(ErrorCode::invalid_argument, "folds");
    folds = body["folds"].get<std::size_t>();
  }
  FeatureWeighting weighting = FeatureWeighting::presence;
  if (body.contains("weighting")) {
    auto parsed = body["weighting"].is_string()
                      ? parse_feature_weighting(body["weighting"].get<std::string>())
                      : std::nullopt;
    if (!parsed)
      throw Error(ErrorCode::invalid_argument, "weighting");
    weighting = *parsed;
  }

  std::lock_guard writer(writer_mutex_);
  AppState next = trigger_retrain(*snapshot(), *kind, hyper, folds, options_.threads, weighting);
  json report = cv_report_to_json(*next.cv_report);
  commit(std::move(next));
  return {200, std::move(report)};
}

ApiResponse TriageService::post_reload(const std::string &raw_body) {
  RuleConfig config;
  const json body = parse_body(raw_body);
  if (body.contains("config")) {
    config = parse_rule_config(body["config"]);
  } else if (options_.rules_path) {
    config = load_rule_config(*options_.rules_path);
  } else {
    throw Error(ErrorCode::invalid_argument, "no rule config supplied");
  }
  std::lock_guard writer(writer_mutex_);
  AppState next = reload_rules(*snapshot(), std::move(config));
  json summary = detection_summary(next.detection);
  commit(std::move(next));
  return {200, std::move(summary)};
}

void TriageService::mount(httplib::Server &server,
                          const std::optional<std::filesystem::path> &static_dir) {
  auto route = [this](const httplib::Request &req, httplib::Response &res) {
    ApiRequest request{req.method, req.path, {}, req.body};
    for (const auto &[key, value] : req.params)
      request.query.emplace(key, value);
    ApiResponse response = handle(request);
    res.status = response.status;
    res.set_content(response.body.dump(), "application/json");
  };
  server.Get(R"(/api/.*)", route);
  server.Post(R"(/api/.*)", route);
  if (static_dir)
    server.set_mount_point("/", static_dir->string());
}

} // namespace sentinel
