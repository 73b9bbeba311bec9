#include "sentinel/rules.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "sentinel/error.hpp"
#include "text_util.hpp"

namespace sentinel {

using nlohmann::json;

namespace {

constexpr std::string_view kTopLevelKeys[] = {
    "business_countries", "keyword_categories", "page_categories",
    "repeat_access", "volume_threshold"};

constexpr RuleKind kAllKinds[] = {
    RuleKind::sensitive_search_foreign, RuleKind::employee_only_access,
    RuleKind::repeat_employee_only_access, RuleKind::volume_threshold,
    RuleKind::engagement_page_foreign};

[[noreturn]] void config_error(std::string key) {
  throw Error(ErrorCode::config_error, std::move(key));
}

bool is_sensitive(std::string_view name) {
  const auto &s = sensitive_categories();
  return std::find(s.begin(), s.end(), name) != s.end();
}

std::size_t count_field(const json &obj, const char *parent, const char *field,
                        std::size_t fallback) {
  auto it = obj.find(field);
  if (it == obj.end())
    return fallback;
  if (!it->is_number_integer() || it->get<std::int64_t>() < 0)
    config_error(std::string(parent) + "." + field);
  return it->get<std::size_t>();
}

void reject_unknown_fields(const json &obj, const char *parent,
                           std::initializer_list<std::string_view> allowed) {
  for (const auto &[key, _] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      config_error(std::string(parent) + "." + key);
}

std::optional<VolumeWindow> parse_volume_window(std::string_view text) {
  if (text == "daily")
    return VolumeWindow::daily;
  if (text == "weekly")
    return VolumeWindow::weekly;
  if (text == "monthly")
    return VolumeWindow::monthly;
  return std::nullopt;
}

void validate(const RuleConfig &config) {
  if (config.business_countries.empty())
    config_error("business_countries");
  for (const auto &c : config.business_countries)
    if (detail::trim(c).empty())
      config_error("business_countries");
  for (const auto &[name, tokens] : config.keyword_categories) {
    if (!is_sensitive(name))
      config_error(name);
    for (const auto &t : tokens)
      if (t.empty() || t != detail::to_lower(t) ||
          std::any_of(t.begin(), t.end(), detail::is_space))
        config_error(name);
  }
  for (const auto &[name, patterns] : config.page_categories) {
    if (!known_categories().contains(name))
      config_error(name);
    for (const auto &p : patterns)
      if (p.empty())
        config_error(name);
  }
  if (config.repeat_access.min_occurrences < 2)
    config_error("repeat_access.min_occurrences");
  if (config.repeat_access.window_days < 1)
    config_error("repeat_access.window_days");
  if (config.volume_threshold.max_records < 1)
    config_error("volume_threshold.max_records");
}

bool starts_with_pattern(const std::vector<std::string> &tokens,
                         const PagePattern &pattern) {
  return tokens.size() >= pattern.size() &&
         std::equal(pattern.begin(), pattern.end(), tokens.begin());
}

std::string page_evidence(std::string_view cat, const PagePattern &p) {
  return "page:" + std::string(cat) + ":" + detail::join(p, "/");
}

} // namespace

std::string_view to_string(RuleKind kind) {
  switch (kind) {
  case RuleKind::sensitive_search_foreign: return "sensitive_search_foreign";
  case RuleKind::employee_only_access: return "employee_only_access";
  case RuleKind::repeat_employee_only_access: return "repeat_employee_only_access";
  case RuleKind::volume_threshold: return "volume_threshold";
  case RuleKind::engagement_page_foreign: return "engagement_page_foreign";
  }
  return "unknown";
}

std::optional<RuleKind> parse_rule_kind(std::string_view text) {
  for (auto k : kAllKinds)
    if (to_string(k) == text)
      return k;
  return std::nullopt;
}

std::string_view to_string(VolumeWindow window) {
  switch (window) {
  case VolumeWindow::daily: return "daily";
  case VolumeWindow::weekly: return "weekly";
  case VolumeWindow::monthly: return "monthly";
  }
  return "daily";
}

const std::vector<std::string> &sensitive_categories() {
  static const std::vector<std::string> cats = {
      std::string(category::sensitive_product),
      std::string(category::sensitive_service),
      std::string(category::employee_contact),
      std::string(category::employee_bio)};
  return cats;
}

const std::set<std::string> &known_categories() {
  static const std::set<std::string> cats = {
      std::string(category::sensitive_product),
      std::string(category::sensitive_service),
      std::string(category::employee_contact),
      std::string(category::employee_bio),
      std::string(category::employee_only),
      std::string(category::newsletter_registration),
      std::string(category::enquiry_form)};
  return cats;
}

RuleConfig parse_rule_config(const json &doc) {
  if (!doc.is_object())
    config_error("<document>");
  for (const auto &[key, _] : doc.items())
    if (std::find(std::begin(kTopLevelKeys), std::end(kTopLevelKeys), key) ==
        std::end(kTopLevelKeys))
      config_error(key);
  for (auto key : kTopLevelKeys)
    if (!doc.contains(key))
      config_error(std::string(key));

  RuleConfig config;

  const auto &countries = doc["business_countries"];
  if (!countries.is_array())
    config_error("business_countries");
  for (const auto &c : countries) {
    if (!c.is_string())
      config_error("business_countries");
    config.business_countries.insert(std::string(detail::trim(c.get<std::string>())));
  }

  const auto &kw = doc["keyword_categories"];
  if (!kw.is_object())
    config_error("keyword_categories");
  for (const auto &[name, tokens] : kw.items()) {
    if (!tokens.is_array())
      config_error(name);
    auto &set = config.keyword_categories[name];
    for (const auto &t : tokens) {
      if (!t.is_string())
        config_error(name);
      set.insert(detail::to_lower(detail::trim(t.get<std::string>())));
    }
  }

  const auto &pages = doc["page_categories"];
  if (!pages.is_object())
    config_error("page_categories");
  for (const auto &[name, patterns] : pages.items()) {
    if (!patterns.is_array())
      config_error(name);
    auto &list = config.page_categories[name];
    for (const auto &p : patterns) {
      if (!p.is_string())
        config_error(name);
      list.push_back(normalize_url(p.get<std::string>()));
    }
  }

  const auto &repeat = doc["repeat_access"];
  if (!repeat.is_object())
    config_error("repeat_access");
  reject_unknown_fields(repeat, "repeat_access", {"min_occurrences", "window_days"});
  config.repeat_access.min_occurrences =
      count_field(repeat, "repeat_access", "min_occurrences", 3);
  config.repeat_access.window_days =
      count_field(repeat, "repeat_access", "window_days", 7);

  const auto &volume = doc["volume_threshold"];
  if (!volume.is_object())
    config_error("volume_threshold");
  reject_unknown_fields(volume, "volume_threshold", {"max_records", "window"});
  config.volume_threshold.max_records =
      count_field(volume, "volume_threshold", "max_records", 200);
  if (auto w = volume.find("window"); w != volume.end()) {
    auto parsed = w->is_string() ? parse_volume_window(w->get<std::string>())
                                 : std::nullopt;
    if (!parsed)
      config_error("volume_threshold.window");
    config.volume_threshold.window = *parsed;
  }

  validate(config);
  return config;
}

RuleConfig load_rule_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::io_failure, "cannot open " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded())
    throw Error(ErrorCode::config_error, "<document>: invalid JSON in " + path.string());
  return parse_rule_config(doc);
}

json rule_config_to_json(const RuleConfig &config) {
  json pages = json::object();
  for (const auto &[name, patterns] : config.page_categories) {
    json list = json::array();
    for (const auto &p : patterns)
      list.push_back(detail::join(p, "/"));
    pages[name] = std::move(list);
  }
  json keywords = json::object();
  for (const auto &[name, tokens] : config.keyword_categories)
    keywords[name] = tokens;
  return json{
      {"business_countries", config.business_countries},
      {"keyword_categories", std::move(keywords)},
      {"page_categories", std::move(pages)},
      {"repeat_access",
       {{"min_occurrences", config.repeat_access.min_occurrences},
        {"window_days", config.repeat_access.window_days}}},
      {"volume_threshold",
       {{"max_records", config.volume_threshold.max_records},
        {"window", to_string(config.volume_threshold.window)}}},
  };
}

RuleSet::RuleSet(RuleConfig config, std::vector<Rule> rules)
    : config_(std::move(config)), rules_(std::move(rules)) {
  for (const auto &c : config_.business_countries)
    business_lower_.insert(detail::to_lower(detail::trim(c)));
}

bool RuleSet::is_business_country(std::string_view country) const {
  return business_lower_.contains(detail::to_lower(detail::trim(country)));
}

RuleSet RuleSet::restricted_to(const std::set<std::string> &rule_ids) const {
  std::vector<Rule> kept;
  for (const auto &r : rules_)
    if (rule_ids.contains(r.rule_id))
      kept.push_back(r);
  return RuleSet(config_, std::move(kept));
}

RuleSet compile_ruleset(RuleConfig config) {
  validate(config);
  auto has_page = [&](std::string_view c) {
    return config.page_categories.contains(std::string(c));
  };
  std::vector<Rule> rules;

  Rule sensitive{std::string(to_string(RuleKind::sensitive_search_foreign)),
                 RuleKind::sensitive_search_foreign, {}, {}};
  for (const auto &c : sensitive_categories()) {
    if (config.keyword_categories.contains(c))
      sensitive.keyword_categories.push_back(c);
    if (has_page(c))
      sensitive.page_categories.push_back(c);
  }
  if (!sensitive.keyword_categories.empty() || !sensitive.page_categories.empty())
    rules.push_back(std::move(sensitive));

  if (has_page(category::employee_only)) {
    for (auto kind : {RuleKind::employee_only_access,
                      RuleKind::repeat_employee_only_access})
      rules.push_back(Rule{std::string(to_string(kind)), kind, {},
                           {std::string(category::employee_only)}});
  }

  rules.push_back(Rule{std::string(to_string(RuleKind::volume_threshold)),
                       RuleKind::volume_threshold, {}, {}});

  Rule engagement{std::string(to_string(RuleKind::engagement_page_foreign)),
                  RuleKind::engagement_page_foreign, {}, {}};
  for (auto c : {category::newsletter_registration, category::enquiry_form})
    if (has_page(c))
      engagement.page_categories.emplace_back(c);
  if (!engagement.page_categories.empty())
    rules.push_back(std::move(engagement));

  return RuleSet(std::move(config), std::move(rules));
}

std::optional<PagePattern> match_page(const RuleConfig &config,
                                      std::string_view category,
                                      const TrafficRecord &record) {
  auto it = config.page_categories.find(std::string(category));
  if (it == config.page_categories.end())
    return std::nullopt;
  for (const auto &p : it->second)
    if (starts_with_pattern(record.url_tokens, p))
      return p;
  return std::nullopt;
}

AccessHistory::AccessHistory(const RuleSet &rules,
                             std::span<const UserSession> sessions)
    : window_(rules.config().volume_threshold.window) {
  for (const auto &s : sessions) {
    volume_[volume_bucket(s.key)] += s.length();
    std::size_t visits = 0;
    for (const auto &r : s.records)
      if (match_page(rules.config(), category::employee_only, r))
        ++visits;
    if (visits > 0)
      employee_only_[location_key(s.key)][s.key.date.to_days()] += visits;
  }
}

std::string AccessHistory::location_key(const SessionKey &key) const {
  return key.country + '\x1f' + key.city;
}

std::string AccessHistory::volume_bucket(const SessionKey &key) const {
  Date d = key.date;
  if (window_ == VolumeWindow::weekly)
    d = d.week_start();
  else if (window_ == VolumeWindow::monthly)
    d.day = 1;
  return location_key(key) + '\x1f' + d.iso();
}

std::size_t AccessHistory::employee_only_visits(const SessionKey &key,
                                                std::size_t window_days) const {
  auto loc = employee_only_.find(location_key(key));
  if (loc == employee_only_.end())
    return 0;
  const std::int64_t last = key.date.to_days();
  const std::int64_t first = last - static_cast<std::int64_t>(window_days) + 1;
  std::size_t total = 0;
  for (auto it = loc->second.lower_bound(first);
       it != loc->second.end() && it->first <= last; ++it)
    total += it->second;
  return total;
}

std::size_t AccessHistory::records_in_volume_window(const SessionKey &key) const {
  auto it = volume_.find(volume_bucket(key));
  return it == volume_.end() ? 0 : it->second;
}

std::vector<RuleMatch> evaluate_session(const RuleSet &rules,
                                        const UserSession &session,
                                        const AccessHistory &history) {
  const RuleConfig &config = rules.config();
  const bool foreign = !rules.is_business_country(session.key.country);
  std::vector<RuleMatch> matches;

  for (const auto &rule : rules.rules()) {
    std::vector<Evidence> evidence;
    switch (rule.kind) {
    case RuleKind::sensitive_search_foreign:
      if (!foreign)
        break;
      for (const auto &r : session.records) {
        for (const auto &cat : rule.keyword_categories) {
          const auto &tokens = config.keyword_categories.at(cat);
          std::set<std::string_view> seen;
          for (const auto &kw : r.keywords)
            if (tokens.contains(kw) && seen.insert(kw).second)
              evidence.push_back({r.record_id, "keyword:" + cat + ":" + kw});
        }
        for (const auto &cat : rule.page_categories)
          if (auto p = match_page(config, cat, r))
            evidence.push_back({r.record_id, page_evidence(cat, *p)});
      }
      break;
    case RuleKind::employee_only_access:
      if (!foreign)
        break;
      for (const auto &r : session.records)
        if (auto p = match_page(config, category::employee_only, r))
          evidence.push_back({r.record_id, page_evidence(category::employee_only, *p)});
      break;
    case RuleKind::repeat_employee_only_access: {
      for (const auto &r : session.records)
        if (auto p = match_page(config, category::employee_only, r))
          evidence.push_back({r.record_id, page_evidence(category::employee_only, *p)});
      if (!evidence.empty() &&
          history.employee_only_visits(session.key,
                                       config.repeat_access.window_days) <
              config.repeat_access.min_occurrences)
        evidence.clear();
      break;
    }
    case RuleKind::volume_threshold: {
      const std::size_t observed =
          std::max(session.length(), history.records_in_volume_window(session.key));
      if (observed > config.volume_threshold.max_records)
        evidence.push_back({session.records.front().record_id,
                            "volume:" + std::to_string(observed)});
      break;
    }
    case RuleKind::engagement_page_foreign:
      if (!foreign)
        break;
      for (const auto &r : session.records)
        for (const auto &cat : rule.page_categories)
          if (auto p = match_page(config, cat, r))
            evidence.push_back({r.record_id, page_evidence(cat, *p)});
      break;
    }
    if (!evidence.empty())
      matches.push_back({rule.rule_id, session.session_id, std::move(evidence)});
  }
  return matches;
}

std::set<std::string> DetectionReport::flagged_ids() const {
  std::set<std::string> ids;
  for (const auto &m : matches)
    ids.insert(m.session_id);
  return ids;
}

DetectionReport run_detection(const RuleSet &rules,
                              std::span<const UserSession> sessions) {
  const AccessHistory history(rules, sessions);
  DetectionReport report;
  report.total_sessions = sessions.size();
  for (const auto &s : sessions) {
    auto matches = evaluate_session(rules, s, history);
    if (!matches.empty())
      ++report.flagged_sessions;
    for (auto &m : matches)
      report.matches.push_back(std::move(m));
  }
  report.fraction = report.total_sessions == 0
                        ? 0.0
                        : static_cast<double>(report.flagged_sessions) /
                              static_cast<double>(report.total_sessions);
  return report;
}

json rule_match_to_json(const RuleMatch &match) {
  json evidence = json::array();
  for (const auto &e : match.evidence)
    evidence.push_back({{"record_id", e.record_id}, {"matched", e.matched}});
  return json{{"rule_id", match.rule_id},
              {"session_id", match.session_id},
              {"evidence", std::move(evidence)}};
}

RuleMatch rule_match_from_json(const json &obj) {
  try {
    RuleMatch m;
    m.rule_id = obj.at("rule_id").get<std::string>();
    m.session_id = obj.at("session_id").get<std::string>();
    for (const auto &e : obj.at("evidence"))
      m.evidence.push_back({e.at("record_id").get<std::string>(),
                            e.at("matched").get<std::string>()});
    if (m.evidence.empty())
      throw Error(ErrorCode::invalid_format, "rule match without evidence");
    return m;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::invalid_format, e.what());
  }
}

void write_detection(std::ostream &out, const DetectionReport &report) {
  for (const auto &m : report.matches)
    out << rule_match_to_json(m).dump() << '\n';
  json summary = {{"summary",
                   {{"total_sessions", report.total_sessions},
                    {"flagged_sessions", report.flagged_sessions},
                    {"fraction", report.fraction}}}};
  out << summary.dump() << '\n';
}

DetectionReport read_detection(std::istream &in) {
  DetectionReport report;
  bool have_summary = false;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty())
      continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object())
      throw Error(ErrorCode::invalid_format, "detection line is not a JSON object");
    if (auto s = obj.find("summary"); s != obj.end()) {
      try {
        report.total_sessions = s->at("total_sessions").get<std::size_t>();
        report.flagged_sessions = s->at("flagged_sessions").get<std::size_t>();
        report.fraction = s->at("fraction").get<double>();
      } catch (const json::exception &e) {
        throw Error(ErrorCode::invalid_format, e.what());
      }
      have_summary = true;
      continue;
    }
    report.matches.push_back(rule_match_from_json(obj));
  }
  if (!have_summary)
    throw Error(ErrorCode::invalid_format, "detection report without summary");
  if (report.flagged_ids().size() != report.flagged_sessions)
    throw Error(ErrorCode::invalid_format, "summary disagrees with matches");
  return report;
}

} // namespace sentinel
