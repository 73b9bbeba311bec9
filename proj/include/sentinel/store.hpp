#ifndef SENTINEL_STORE_HPP
#define SENTINEL_STORE_HPP

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sentinel/features.hpp"
#include "sentinel/models.hpp"
#include "sentinel/rules.hpp"
#include "sentinel/sessionize.hpp"

namespace sentinel {

using LabelTime = std::chrono::sys_time<std::chrono::milliseconds>;

/// ISO-8601 UTC with milliseconds, e.g. 2026-10-15T12:00:00.000Z.
std::string format_label_time(LabelTime t);
std::optional<LabelTime> parse_label_time(std::string_view text);

struct LabelRecord {
  std::string session_id;
  Label label = Label::benign;
  std::string labeler;
  LabelTime labeled_at{};

  bool operator==(const LabelRecord &) const = default;
};

inline constexpr std::string_view kAutoSampleLabeler = "auto-sample";

/// Everything the triage loop persists. `label_history` is append-only; the
/// effective label of a session is the latest entry by labeled_at, later
/// entries winning ties.
struct AppState {
  std::vector<UserSession> sessions;
  DetectionReport detection;
  std::vector<LabelRecord> label_history;
  std::optional<Vocabulary> vocabulary;
  std::optional<LinearModel> model;
  std::optional<CVReport> cv_report;
  RuleConfig rule_config;

  const UserSession *find_session(std::string_view id) const;
  std::map<std::string, LabelRecord> effective_labels() const;
  std::map<std::string, Label> effective_label_values() const;

  bool operator==(const AppState &) const = default;
};

/// Compiles the rules and runs detection over `sessions`.
AppState make_state(std::vector<UserSession> sessions, RuleConfig rules);

/// Writes one file per component plus manifest.json holding their SHA-256
/// digests. Files are written to temporaries and renamed into place.
void save_state(const AppState &state, const std::filesystem::path &dir);

/// Throws Error(corrupt_state) when a component is missing, a digest does not
/// match the manifest, or the model is bound to a different vocabulary.
AppState load_state(const std::filesystem::path &dir);

/// Throws Error(unknown_session_id).
AppState apply_label(AppState state, LabelRecord label);

/// Labels up to `n` unflagged, unlabeled sessions as benign, chosen by a
/// SplitMix64(seed) shuffle over session order. Returns how many were added.
std::size_t sample_benign(AppState &state, std::size_t n, std::uint64_t seed,
                          LabelTime now);

/// Rebuilds the vocabulary over labeled sessions, trains on all of them and
/// cross-validates with `folds` folds. The input state is left untouched;
/// the returned state carries the new vocabulary, model and report.
/// Throws Error(insufficient_labels) naming the deficient class.
AppState trigger_retrain(const AppState &state, ModelKind kind,
                         const Hyper &hyper, std::size_t folds = 5,
                         unsigned threads = 1,
                         FeatureWeighting weighting = FeatureWeighting::presence);

/// Recompiles `rules` and reruns detection; model and labels are kept.
AppState reload_rules(const AppState &state, RuleConfig rules);

enum class SessionFilter { flagged, unlabeled, all };
std::optional<SessionFilter> parse_session_filter(std::string_view text);

struct SessionSummaryRow {
  std::string session_id;
  std::string country;
  std::string city;
  Date date;
  std::size_t length = 0;
  std::vector<std::string> rule_ids;
  double score = 0.0;
};

/// Triage order: model ranking score when a model exists, otherwise the
/// number of rule matches; descending, ties by session_id.
std::vector<SessionSummaryRow> rank_sessions(const AppState &state,
                                             SessionFilter filter);

nlohmann::json label_to_json(const LabelRecord &label);
LabelRecord label_from_json(const nlohmann::json &obj);

} // namespace sentinel

#endif // SENTINEL_STORE_HPP
