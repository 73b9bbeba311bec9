#include "sentinel/store.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "sentinel/digest.hpp"
#include "sentinel/error.hpp"
#include "sentinel/random.hpp"
#include "text_util.hpp"

namespace sentinel {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char *kManifest = "manifest.json";
constexpr const char *kSessions = "sessions.ndjson";
constexpr const char *kDetection = "detection.ndjson";
constexpr const char *kLabels = "labels.ndjson";
constexpr const char *kRules = "rules.json";
constexpr const char *kVocabulary = "vocabulary.json";
constexpr const char *kModel = "model.json";
constexpr const char *kCvReport = "cv_report.json";

void write_file(const fs::path &path, const std::string &content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error(ErrorCode::io_failure, "cannot write " + tmp.string());
    out << content;
    if (!out)
      throw Error(ErrorCode::io_failure, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec)
    throw Error(ErrorCode::io_failure, "cannot rename into " + path.string());
}

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::corrupt_state, "missing " + path.filename().string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int parse_digits(std::string_view s) {
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9')
      return -1;
    v = v * 10 + (c - '0');
  }
  return v;
}

} // namespace

std::string format_label_time(LabelTime t) {
  const std::int64_t ms = t.time_since_epoch().count();
  constexpr std::int64_t kDay = 86'400'000;
  std::int64_t days = ms / kDay;
  std::int64_t rem = ms % kDay;
  if (rem < 0) {
    rem += kDay;
    --days;
  }
  const Date d = Date::from_days(days);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02d.%03dZ", d.iso().c_str(),
                static_cast<int>(rem / 3'600'000), static_cast<int>(rem / 60'000 % 60),
                static_cast<int>(rem / 1000 % 60), static_cast<int>(rem % 1000));
  return buf;
}

std::optional<LabelTime> parse_label_time(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SS.mmmZ
  if (text.size() != 24 || text[10] != 'T' || text[13] != ':' ||
      text[16] != ':' || text[19] != '.' || text[23] != 'Z')
    return std::nullopt;
  auto date = Date::parse(text.substr(0, 10));
  const int h = parse_digits(text.substr(11, 2));
  const int m = parse_digits(text.substr(14, 2));
  const int s = parse_digits(text.substr(17, 2));
  const int ms = parse_digits(text.substr(20, 3));
  if (!date || h < 0 || h > 23 || m < 0 || m > 59 || s < 0 || s > 59 || ms < 0)
    return std::nullopt;
  const std::int64_t total =
      date->to_days() * 86'400'000 + h * 3'600'000LL + m * 60'000LL + s * 1000LL + ms;
  return LabelTime{std::chrono::milliseconds{total}};
}

const UserSession *AppState::find_session(std::string_view id) const {
  for (const auto &s : sessions)
    if (s.session_id == id)
      return &s;
  return nullptr;
}

std::map<std::string, LabelRecord> AppState::effective_labels() const {
  std::map<std::string, LabelRecord> out;
  for (const auto &rec : label_history) {
    auto it = out.find(rec.session_id);
    if (it == out.end())
      out.emplace(rec.session_id, rec);
    else if (rec.labeled_at >= it->second.labeled_at)
      it->second = rec;
  }
  return out;
}

std::map<std::string, Label> AppState::effective_label_values() const {
  std::map<std::string, Label> out;
  for (const auto &[id, rec] : effective_labels())
    out.emplace(id, rec.label);
  return out;
}

AppState make_state(std::vector<UserSession> sessions, RuleConfig rules) {
  AppState state;
  const RuleSet rule_set = compile_ruleset(rules);
  state.detection = run_detection(rule_set, sessions);
  state.sessions = std::move(sessions);
  state.rule_config = std::move(rules);
  return state;
}

json label_to_json(const LabelRecord &label) {
  return json{{"session_id", label.session_id},
              {"label", to_string(label.label)},
              {"labeler", label.labeler},
              {"labeled_at", format_label_time(label.labeled_at)}};
}

LabelRecord label_from_json(const json &obj) {
  try {
    LabelRecord rec;
    rec.session_id = obj.at("session_id").get<std::string>();
    auto label = parse_label(obj.at("label").get<std::string>());
    if (!label)
      throw Error(ErrorCode::invalid_format, "label");
    rec.label = *label;
    rec.labeler = obj.at("labeler").get<std::string>();
    auto at = parse_label_time(obj.at("labeled_at").get<std::string>());
    if (!at)
      throw Error(ErrorCode::invalid_format, "labeled_at");
    rec.labeled_at = *at;
    return rec;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::invalid_format, e.what());
  }
}

void save_state(const AppState &state, const fs::path &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw Error(ErrorCode::io_failure, "cannot create " + dir.string());

  std::map<std::string, std::string> files;
  {
    std::ostringstream ss;
    write_sessions(ss, state.sessions);
    files[kSessions] = ss.str();
  }
  {
    std::ostringstream ss;
    write_detection(ss, state.detection);
    files[kDetection] = ss.str();
  }
  {
    std::ostringstream ss;
    for (const auto &l : state.label_history)
      ss << label_to_json(l).dump() << '\n';
    files[kLabels] = ss.str();
  }
  files[kRules] = rule_config_to_json(state.rule_config).dump(2) + "\n";
  if (state.vocabulary)
    files[kVocabulary] = vocabulary_to_json(*state.vocabulary).dump() + "\n";
  if (state.model)
    files[kModel] = model_to_json(*state.model).dump() + "\n";
  if (state.cv_report)
    files[kCvReport] = cv_report_to_json(*state.cv_report).dump(2) + "\n";

  json manifest = {{"files", json::object()}};
  for (const auto &[name, content] : files) {
    write_file(dir / name, content);
    manifest["files"][name] = sha256_hex(content);
  }
  for (const char *optional : {kVocabulary, kModel, kCvReport})
    if (!files.contains(optional))
      fs::remove(dir / optional, ec);
  write_file(dir / kManifest, manifest.dump(2) + "\n");
}

AppState load_state(const fs::path &dir) {
  if (!fs::exists(dir / kManifest))
    throw Error(ErrorCode::corrupt_state, std::string("missing ") + kManifest);
  json manifest = json::parse(read_file(dir / kManifest), nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("files") ||
      !manifest["files"].is_object())
    throw Error(ErrorCode::corrupt_state, std::string("unreadable ") + kManifest);
  const json &listed = manifest["files"];

  for (const char *required : {kSessions, kDetection, kLabels, kRules})
    if (!listed.contains(required))
      throw Error(ErrorCode::corrupt_state, std::string("missing ") + required);

  auto component = [&](const char *name) -> std::optional<std::string> {
    if (!listed.contains(name))
      return std::nullopt;
    std::string content = read_file(dir / name);
    if (!listed[name].is_string() || sha256_hex(content) != listed[name].get<std::string>())
      throw Error(ErrorCode::corrupt_state, std::string(name) + ": digest mismatch");
    return content;
  };
  auto guarded = [&](const char *name, auto &&parse) {
    try {
      return parse();
    } catch (const Error &e) {
      if (e.code() == ErrorCode::corrupt_state)
        throw;
      throw Error(ErrorCode::corrupt_state, std::string(name) + ": " + e.what());
    }
  };

  AppState state;
  {
    std::istringstream ss(*component(kSessions));
    state.sessions = guarded(kSessions, [&] { return read_sessions(ss); });
  }
  {
    std::istringstream ss(*component(kDetection));
    state.detection = guarded(kDetection, [&] { return read_detection(ss); });
  }
  {
    std::istringstream ss(*component(kLabels));
    std::string line;
    while (std::getline(ss, line)) {
      if (detail::trim(line).empty())
        continue;
      state.label_history.push_back(guarded(kLabels, [&] {
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded())
          throw Error(ErrorCode::invalid_format, "invalid JSON");
        return label_from_json(obj);
      }));
    }
  }
  state.rule_config = guarded(kRules, [&] {
    json doc = json::parse(*component(kRules), nullptr, false);
    if (doc.is_discarded())
      throw Error(ErrorCode::invalid_format, "invalid JSON");
    return parse_rule_config(doc);
  });
  if (auto text = component(kVocabulary))
    state.vocabulary = guarded(kVocabulary, [&] {
      return vocabulary_from_json(json::parse(*text));
    });
  if (auto text = component(kModel))
    state.model = guarded(kModel, [&] { return model_from_json(json::parse(*text)); });
  if (auto text = component(kCvReport))
    state.cv_report = guarded(kCvReport, [&] {
      return cv_report_from_json(json::parse(*text));
    });

  if (state.model) {
    if (!state.vocabulary)
      throw Error(ErrorCode::corrupt_state, "model.json without vocabulary.json");
    if (state.model->vocabulary_digest != state.vocabulary->digest())
      throw Error(ErrorCode::corrupt_state, "model.json: vocabulary digest mismatch");
    if (state.model->dimension() != state.vocabulary->dimension())
      throw Error(ErrorCode::corrupt_state, "model.json: dimension mismatch");
  }
  return state;
}

AppState apply_label(AppState state, LabelRecord label) {
  if (!state.find_session(label.session_id))
    throw Error(ErrorCode::unknown_session_id, label.session_id);
  state.label_history.push_back(std::move(label));
  return state;
}

std::size_t sample_benign(AppState &state, std::size_t n, std::uint64_t seed,
                          LabelTime now) {
  const auto flagged = state.detection.flagged_ids();
  const auto labeled = state.effective_labels();
  std::vector<std::string> candidates;
  for (const auto &s : state.sessions)
    if (!flagged.contains(s.session_id) && !labeled.contains(s.session_id))
      candidates.push_back(s.session_id);
  SplitMix64 rng(seed);
  rng.shuffle(candidates);
  const std::size_t take = std::min(n, candidates.size());
  for (std::size_t i = 0; i < take; ++i)
    state.label_history.push_back(LabelRecord{candidates[i], Label::benign,
                                              std::string(kAutoSampleLabeler), now});
  return take;
}

AppState trigger_retrain(const AppState &state, ModelKind kind,
                         const Hyper &hyper, std::size_t folds, unsigned threads,
                         FeatureWeighting weighting) {
  const auto labels = state.effective_label_values();
  std::size_t counts[2] = {0, 0};
  for (const auto &[_, label] : labels)
    ++counts[static_cast<int>(label)];
  if (counts[static_cast<int>(Label::suspicious)] < folds)
    throw Error(ErrorCode::insufficient_labels, "suspicious");
  if (counts[static_cast<int>(Label::benign)] < folds)
    throw Error(ErrorCode::insufficient_labels, "benign");

  std::vector<UserSession> labeled;
  for (const auto &s : state.sessions)
    if (labels.contains(s.session_id))
      labeled.push_back(s);

  Vocabulary vocab = build_vocabulary(labeled, 1, weighting);
  LabeledDataset ds = assemble_dataset(labeled, labels, vocab);
  LinearModel model = train(ds, hyper, kind);
  model.vocabulary_digest = vocab.digest();
  CVReport report = cross_validate(ds, folds, kind, hyper, threads);

  AppState next = state;
  next.vocabulary = std::move(vocab);
  next.model = std::move(model);
  next.cv_report = std::move(report);
  return next;
}

AppState reload_rules(const AppState &state, RuleConfig rules) {
  const RuleSet rule_set = compile_ruleset(rules);
  AppState next = state;
  next.detection = run_detection(rule_set, next.sessions);
  next.rule_config = std::move(rules);
  return next;
}

std::optional<SessionFilter> parse_session_filter(std::string_view text) {
  if (text == "flagged")
    return SessionFilter::flagged;
  if (text == "unlabeled")
    return SessionFilter::unlabeled;
  if (text == "all")
    return SessionFilter::all;
  return std::nullopt;
}

std::vector<SessionSummaryRow> rank_sessions(const AppState &state,
                                             SessionFilter filter) {
  std::map<std::string, std::vector<std::string>> rules_by_session;
  for (const auto &m : state.detection.matches)
    rules_by_session[m.session_id].push_back(m.rule_id);
  const auto labels = state.effective_labels();
  const bool scored = state.model && state.vocabulary;

  std::vector<SessionSummaryRow> rows;
  for (const auto &s : state.sessions) {
    auto matched = rules_by_session.find(s.session_id);
    const bool flagged = matched != rules_by_session.end();
    if (filter == SessionFilter::flagged && !flagged)
      continue;
    if (filter == SessionFilter::unlabeled && labels.contains(s.session_id))
      continue;
    SessionSummaryRow row;
    row.session_id = s.session_id;
    row.country = s.key.country;
    row.city = s.key.city;
    row.date = s.key.date;
    row.length = s.length();
    if (flagged)
      row.rule_ids = matched->second;
    row.score = scored ? ranking_score(*state.model, vectorize(s, *state.vocabulary))
                       : static_cast<double>(row.rule_ids.size());
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(),
            [](const SessionSummaryRow &a, const SessionSummaryRow &b) {
              if (a.score != b.score)
                return a.score > b.score;
              return a.session_id < b.session_id;
            });
  return rows;
}

} // namespace sentinel
