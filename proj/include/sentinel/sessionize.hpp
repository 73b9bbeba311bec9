#ifndef SENTINEL_SESSIONIZE_HPP
#define SENTINEL_SESSIONIZE_HPP

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sentinel/civil_time.hpp"
#include "sentinel/ingest.hpp"

namespace sentinel {

/// Grouping key: records from one location on one calendar date.
struct SessionKey {
  std::string country;
  std::string city;
  Date date;

  bool operator==(const SessionKey &) const = default;
};

/// Output order of sessions: date, then country, then city.
bool session_key_less(const SessionKey &a, const SessionKey &b);

/// True for "Unknown", "(not set)" and empty text, ignoring case.
bool is_unidentified_location(std::string_view value);

/// Projection of a record onto its session key; nullopt when the location
/// is unidentified.
std::optional<SessionKey> session_key(const TrafficRecord &record);

/// Stable hex id from key and first record id.
std::string make_session_id(const SessionKey &key,
                            std::string_view first_record_id);

/// Token multiset as (token, count) pairs in token order.
using TokenCounts = std::vector<std::pair<std::string, std::size_t>>;

/// Occurrences of `token`; 0 when absent.
std::size_t token_count(const TokenCounts &counts, std::string_view token);

/// The unit of analysis: a chronologically ordered run of records sharing
/// one SessionKey.
struct UserSession {
  std::string session_id;
  SessionKey key;
  std::vector<TrafficRecord> records;
  Timestamp start_time;
  Timestamp end_time;
  TokenCounts page_tokens;
  TokenCounts keyword_tokens;

  std::size_t length() const { return records.size(); }

  /// Sorts `records` by (timestamp, record_id) and derives the id, bounds
  /// and token multisets. Records must all carry `key` and be non-empty.
  static UserSession assemble(SessionKey key, std::vector<TrafficRecord> records);

  bool operator==(const UserSession &) const = default;
};

struct DropReport {
  std::size_t unkeyed = 0;
  std::size_t undersized = 0;
  std::size_t undersized_groups = 0;

  std::size_t total() const { return unkeyed + undersized; }
  bool operator==(const DropReport &) const = default;
};

struct SessionBuild {
  std::vector<UserSession> sessions;
  DropReport dropped;
};

/// Groups records by SessionKey and keeps groups of at least `min_length`.
/// Throws Error(invalid_argument) when min_length is 0.
SessionBuild build_sessions(std::vector<TrafficRecord> records,
                            std::size_t min_length = 3);

struct SessionSummary {
  std::size_t session_count = 0;
  std::size_t min_length = 0;
  double mean_length = 0.0; // rounded to one decimal

  bool operator==(const SessionSummary &) const = default;
};

SessionSummary summarize_sessions(std::span<const UserSession> sessions);

nlohmann::json session_to_json(const UserSession &session);
UserSession session_from_json(const nlohmann::json &obj);

void write_sessions(std::ostream &out, std::span<const UserSession> sessions);
std::vector<UserSession> read_sessions(std::istream &in);
std::vector<UserSession> read_sessions_file(const std::filesystem::path &path);

} // namespace sentinel

#endif // SENTINEL_SESSIONIZE_HPP
