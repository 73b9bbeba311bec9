#ifndef SENTINEL_RULES_HPP
#define SENTINEL_RULES_HPP

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sentinel/sessionize.hpp"

namespace sentinel {

enum class RuleKind {
  sensitive_search_foreign,
  employee_only_access,
  repeat_employee_only_access,
  volume_threshold,
  engagement_page_foreign,
};

std::string_view to_string(RuleKind kind);
std::optional<RuleKind> parse_rule_kind(std::string_view text);

namespace category {
inline constexpr std::string_view sensitive_product = "sensitive_product";
inline constexpr std::string_view sensitive_service = "sensitive_service";
inline constexpr std::string_view employee_contact = "employee_contact";
inline constexpr std::string_view employee_bio = "employee_bio";
inline constexpr std::string_view employee_only = "employee_only";
inline constexpr std::string_view newsletter_registration = "newsletter_registration";
inline constexpr std::string_view enquiry_form = "enquiry_form";
} // namespace category

/// Categories whose keywords (or pages) count as a sensitive search.
const std::vector<std::string> &sensitive_categories();
/// Every category name a config may define.
const std::set<std::string> &known_categories();

/// A url-token prefix such as ["employee", "resources"].
using PagePattern = std::vector<std::string>;

enum class VolumeWindow { daily, weekly, monthly };

std::string_view to_string(VolumeWindow window);

struct RepeatAccess {
  std::size_t min_occurrences = 3;
  std::size_t window_days = 7;

  bool operator==(const RepeatAccess &) const = default;
};

struct VolumeThreshold {
  std::size_t max_records = 200;
  VolumeWindow window = VolumeWindow::daily;

  bool operator==(const VolumeThreshold &) const = default;
};

/// Declarative detection settings. Country names compare case-insensitively.
struct RuleConfig {
  std::set<std::string> business_countries;
  std::map<std::string, std::set<std::string>> keyword_categories;
  std::map<std::string, std::vector<PagePattern>> page_categories;
  RepeatAccess repeat_access;
  VolumeThreshold volume_threshold;

  bool operator==(const RuleConfig &) const = default;
};

/// Parses the JSON document form. Exactly the five top-level keys are
/// accepted; the sub-fields of repeat_access and volume_threshold default
/// when omitted. Page patterns are written as paths ("employee/resources").
/// Throws Error(config_error) whose detail names the offending key.
RuleConfig parse_rule_config(const nlohmann::json &doc);
RuleConfig load_rule_config(const std::filesystem::path &path);
nlohmann::json rule_config_to_json(const RuleConfig &config);

struct Rule {
  std::string rule_id;
  RuleKind kind;
  std::vector<std::string> keyword_categories;
  std::vector<std::string> page_categories;

  bool operator==(const Rule &) const = default;
};

class RuleSet {
public:
  RuleSet(RuleConfig config, std::vector<Rule> rules);

  const RuleConfig &config() const { return config_; }
  const std::vector<Rule> &rules() const { return rules_; }

  bool is_business_country(std::string_view country) const;

  /// Copy holding only the named rules, in their original order.
  RuleSet restricted_to(const std::set<std::string> &rule_ids) const;

private:
  RuleConfig config_;
  std::vector<Rule> rules_;
  std::set<std::string> business_lower_;
};

/// Validates the config and emits one rule per kind whose categories are
/// defined. Throws Error(config_error).
RuleSet compile_ruleset(RuleConfig config);

struct Evidence {
  std::string record_id;
  std::string matched;

  bool operator==(const Evidence &) const = default;
};

struct RuleMatch {
  std::string rule_id;
  std::string session_id;
  std::vector<Evidence> evidence;

  bool operator==(const RuleMatch &) const = default;
};

/// Per-location counts gathered in the first detection pass.
class AccessHistory {
public:
  AccessHistory() = default;
  AccessHistory(const RuleSet &rules, std::span<const UserSession> sessions);

  /// Employee-only page visits from (country, city) on dates
  /// [date - window_days + 1, date].
  std::size_t employee_only_visits(const SessionKey &key,
                                   std::size_t window_days) const;

  /// Records from (country, city) inside the volume window containing `date`.
  std::size_t records_in_volume_window(const SessionKey &key) const;

private:
  std::string location_key(const SessionKey &key) const;
  std::string volume_bucket(const SessionKey &key) const;

  VolumeWindow window_ = VolumeWindow::daily;
  std::map<std::string, std::map<std::int64_t, std::size_t>> employee_only_;
  std::map<std::string, std::size_t> volume_;
};

/// True when the record's url tokens start with any pattern of `category`;
/// returns the first matching pattern.
std::optional<PagePattern> match_page(const RuleConfig &config,
                                      std::string_view category,
                                      const TrafficRecord &record);

std::vector<RuleMatch> evaluate_session(const RuleSet &rules,
                                        const UserSession &session,
                                        const AccessHistory &history);

struct DetectionReport {
  std::size_t total_sessions = 0;
  std::size_t flagged_sessions = 0;
  double fraction = 0.0;
  std::vector<RuleMatch> matches;

  std::set<std::string> flagged_ids() const;
  bool operator==(const DetectionReport &) const = default;
};

DetectionReport run_detection(const RuleSet &rules,
                              std::span<const UserSession> sessions);

nlohmann::json rule_match_to_json(const RuleMatch &match);
RuleMatch rule_match_from_json(const nlohmann::json &obj);

/// One RuleMatch object per line followed by a final {"summary": {...}} line.
void write_detection(std::ostream &out, const DetectionReport &report);
DetectionReport read_detection(std::istream &in);

} // namespace sentinel

#endif // SENTINEL_RULES_HPP
