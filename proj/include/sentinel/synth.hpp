#ifndef SENTINEL_SYNTH_HPP
#define SENTINEL_SYNTH_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sentinel/features.hpp"
#include "sentinel/ingest.hpp"
#include "sentinel/rules.hpp"
#include "sentinel/sessionize.hpp"

namespace sentinel {

/// A behavior pattern: where a visitor goes and what they search for.
/// `trigger_pages` / `trigger_keywords` are the rule-relevant items a
/// suspicious archetype is guaranteed to emit; `pages` / `keywords` are
/// background items that never satisfy a rule predicate.
struct Archetype {
  std::string name;
  std::vector<std::string> pages;
  std::vector<std::string> keywords;
  std::optional<RuleKind> triggers;
  std::vector<std::string> trigger_pages;
  std::vector<std::string> trigger_keywords;
};

struct Location {
  std::string country;
  std::string city;
};

struct GeneratorProfile {
  std::size_t n_sessions = 1000;
  double suspicious_fraction = 0.06;
  std::uint64_t seed = 1;
  /// 0 keeps benign and suspicious background pools and locations disjoint;
  /// 1 draws each background item from the other class's pool half the time.
  double overlap = 0.0;
  std::size_t min_length = 3;
  std::size_t max_length = 15;
  Date start_date{2015, 1, 1};
  std::size_t days = 730;
  /// Extra records with an unidentified location; they never form sessions.
  std::size_t unknown_location_records = 0;
  std::string source_name = "synth";

  std::vector<Archetype> benign_archetypes = default_benign_archetypes();
  std::vector<Archetype> suspicious_archetypes = default_suspicious_archetypes();
  std::vector<Location> business_locations = default_business_locations();
  std::vector<Location> foreign_locations = default_foreign_locations();
  /// Categories and thresholds the archetypes are built around. The
  /// business_countries field is replaced by the business locations.
  RuleConfig rule_template = default_rule_template();

  static std::vector<Archetype> default_benign_archetypes();
  static std::vector<Archetype> default_suspicious_archetypes();
  static std::vector<Location> default_business_locations();
  static std::vector<Location> default_foreign_locations();
  static RuleConfig default_rule_template();
};

struct PlannedSession {
  std::string session_id;
  Label label = Label::benign;
  std::optional<std::string> rule_id;
  std::string archetype;
  SessionKey key;
  std::vector<std::string> record_ids; // chronological

  bool operator==(const PlannedSession &) const = default;
};

struct GroundTruth {
  std::uint64_t seed = 0;
  std::vector<PlannedSession> sessions; // session_key_less order

  std::size_t suspicious_count() const;
  std::map<std::string, Label> labels() const;
  bool operator==(const GroundTruth &) const = default;
};

struct SyntheticCorpus {
  std::vector<TrafficRecord> records; // chronological emission order
  GroundTruth truth;
  RuleConfig rules;
};

/// The RuleConfig whose predicates the profile's archetypes are built around.
RuleConfig companion_rule_config(const GeneratorProfile &profile);

/// Deterministic for a profile. Throws Error(infeasible_profile) when the
/// profile cannot be honoured (e.g. more sessions than free location-days)
/// and Error(invalid_argument) for out-of-range fields.
SyntheticCorpus generate_corpus(const GeneratorProfile &profile);

nlohmann::json truth_to_json(const GroundTruth &truth);
GroundTruth truth_from_json(const nlohmann::json &doc);

/// Writes traffic.ndjson, truth.json and rules.json into `dir`.
void write_corpus(const SyntheticCorpus &corpus, const std::filesystem::path &dir);

} // namespace sentinel

#endif // SENTINEL_SYNTH_HPP
