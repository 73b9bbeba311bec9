#include "sentinel/sessionize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "sentinel/digest.hpp"
#include "sentinel/error.hpp"
#include "text_util.hpp"

namespace sentinel {

using nlohmann::json;

namespace {

bool record_less(const TrafficRecord &a, const TrafficRecord &b) {
  if (a.timestamp != b.timestamp)
    return a.timestamp < b.timestamp;
  return a.record_id < b.record_id;
}

std::string group_key(const TrafficRecord &r) {
  std::string k;
  k.reserve(r.country.size() + r.city.size() + 12);
  k += r.country;
  k += '\x1f';
  k += r.city;
  k += '\x1f';
  k += r.timestamp.date.iso();
  return k;
}

} // namespace

bool session_key_less(const SessionKey &a, const SessionKey &b) {
  if (a.date != b.date)
    return a.date < b.date;
  if (a.country != b.country)
    return a.country < b.country;
  return a.city < b.city;
}

bool is_unidentified_location(std::string_view value) {
  value = detail::trim(value);
  return value.empty() || detail::iequals(value, "unknown") ||
         detail::iequals(value, "(not set)");
}

std::optional<SessionKey> session_key(const TrafficRecord &record) {
  if (is_unidentified_location(record.country) ||
      is_unidentified_location(record.city))
    return std::nullopt;
  return SessionKey{record.country, record.city, record.timestamp.date};
}

std::string make_session_id(const SessionKey &key,
                            std::string_view first_record_id) {
  std::string material = key.country;
  material += '\x1f';
  material += key.city;
  material += '\x1f';
  material += key.date.iso();
  material += '\x1f';
  material += first_record_id;
  return sha256_hex(material).substr(0, 16);
}

namespace {

TokenCounts count_tokens(std::vector<std::string_view> tokens) {
  std::sort(tokens.begin(), tokens.end());
  TokenCounts counts;
  for (auto t : tokens) {
    if (!counts.empty() && counts.back().first == t)
      ++counts.back().second;
    else
      counts.emplace_back(std::string(t), 1);
  }
  counts.shrink_to_fit();
  return counts;
}

} // namespace

std::size_t token_count(const TokenCounts &counts, std::string_view token) {
  auto it = std::lower_bound(counts.begin(), counts.end(), token,
                             [](const auto &entry, std::string_view t) { return entry.first < t; });
  return it != counts.end() && it->first == token ? it->second : 0;
}

UserSession UserSession::assemble(SessionKey key,
                                  std::vector<TrafficRecord> records) {
  if (records.empty())
    throw Error(ErrorCode::invalid_argument, "session without records");
  std::sort(records.begin(), records.end(), record_less);
  UserSession s;
  s.session_id = make_session_id(key, records.front().record_id);
  s.key = std::move(key);
  s.start_time = records.front().timestamp;
  s.end_time = records.back().timestamp;
  std::vector<std::string_view> pages, keywords;
  for (const auto &r : records) {
    pages.insert(pages.end(), r.url_tokens.begin(), r.url_tokens.end());
    keywords.insert(keywords.end(), r.keywords.begin(), r.keywords.end());
  }
  s.page_tokens = count_tokens(std::move(pages));
  s.keyword_tokens = count_tokens(std::move(keywords));
  s.records = std::move(records);
  return s;
}

SessionBuild build_sessions(std::vector<TrafficRecord> records,
                            std::size_t min_length) {
  if (min_length == 0)
    throw Error(ErrorCode::invalid_argument, "min_length must be >= 1");

  SessionBuild out;
  std::unordered_map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto &r = records[i];
    if (is_unidentified_location(r.country) || is_unidentified_location(r.city)) {
      ++out.dropped.unkeyed;
      continue;
    }
    groups[group_key(r)].push_back(i);
  }

  struct Group {
    SessionKey key;
    std::vector<std::size_t> members;
  };
  std::vector<Group> kept;
  for (auto &[_, members] : groups) {
    if (members.size() < min_length) {
      out.dropped.undersized += members.size();
      ++out.dropped.undersized_groups;
      continue;
    }
    const auto &first = records[members.front()];
    kept.push_back({SessionKey{first.country, first.city, first.timestamp.date},
                    std::move(members)});
  }
  groups.clear();
  std::sort(kept.begin(), kept.end(), [](const Group &a, const Group &b) {
    return session_key_less(a.key, b.key);
  });

  out.sessions.reserve(kept.size());
  for (auto &g : kept) {
    std::vector<TrafficRecord> members;
    members.reserve(g.members.size());
    for (auto idx : g.members)
      members.push_back(std::move(records[idx]));
    out.sessions.push_back(UserSession::assemble(std::move(g.key), std::move(members)));
  }
  return out;
}

SessionSummary summarize_sessions(std::span<const UserSession> sessions) {
  SessionSummary s;
  if (sessions.empty())
    return s;
  s.session_count = sessions.size();
  s.min_length = sessions.front().length();
  std::size_t total = 0;
  for (const auto &session : sessions) {
    s.min_length = std::min(s.min_length, session.length());
    total += session.length();
  }
  const double mean = static_cast<double>(total) / static_cast<double>(sessions.size());
  s.mean_length = std::round(mean * 10.0) / 10.0;
  return s;
}

json session_to_json(const UserSession &session) {
  json records = json::array();
  for (const auto &r : session.records)
    records.push_back(record_to_json(r));
  return json{{"session_id", session.session_id},
              {"country", session.key.country},
              {"city", session.key.city},
              {"date", session.key.date.iso()},
              {"records", std::move(records)}};
}

UserSession session_from_json(const json &obj) {
  if (!obj.is_object() || !obj.contains("records") || !obj["records"].is_array())
    throw Error(ErrorCode::invalid_format, "session object without records");
  std::vector<TrafficRecord> records;
  for (const auto &r : obj["records"])
    records.push_back(record_from_json(r));
  if (records.empty())
    throw Error(ErrorCode::invalid_format, "session object without records");
  auto key = session_key(records.front());
  if (!key)
    throw Error(ErrorCode::invalid_format, "session with unidentified location");
  for (const auto &r : records)
    if (r.country != key->country || r.city != key->city ||
        r.timestamp.date != key->date)
      throw Error(ErrorCode::invalid_format,
                  "record " + r.record_id + " does not share the session key");
  auto session = UserSession::assemble(std::move(*key), std::move(records));
  if (auto id = obj.find("session_id");
      id != obj.end() && id->is_string() && *id != session.session_id)
    throw Error(ErrorCode::invalid_format,
                "session_id mismatch for " + id->get<std::string>());
  return session;
}

void write_sessions(std::ostream &out, std::span<const UserSession> sessions) {
  for (const auto &s : sessions)
    out << session_to_json(s).dump() << '\n';
}

std::vector<UserSession> read_sessions(std::istream &in) {
  std::vector<UserSession> sessions;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (detail::trim(line).empty())
      continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded())
      throw Error(ErrorCode::invalid_format,
                  "line " + std::to_string(line_number) + ": invalid JSON");
    sessions.push_back(session_from_json(obj));
  }
  if (in.bad())
    throw Error(ErrorCode::io_failure, "reading sessions");
  return sessions;
}

std::vector<UserSession> read_sessions_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::io_failure, "cannot open " + path.string());
  return read_sessions(in);
}

} // namespace sentinel
