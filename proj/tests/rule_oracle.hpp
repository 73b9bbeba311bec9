#ifndef SENTINEL_TESTS_RULE_ORACLE_HPP
#define SENTINEL_TESTS_RULE_ORACLE_HPP

// A deliberately naive evaluator: every predicate is checked literally and
// every location count is recomputed by scanning all sessions.

#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sentinel/rules.hpp"
#include "sentinel/sessionize.hpp"

namespace sentinel::testing {

namespace oracle_detail {

inline std::string lower(std::string s) {
  for (auto &ch : s)
    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

inline bool is_foreign(const RuleConfig &c, const std::string &country) {
  for (const auto &b : c.business_countries)
    if (lower(b) == lower(country))
      return false;
  return true;
}

inline std::optional<std::string> first_pattern(const RuleConfig &c, const std::string &cat,
                                                const TrafficRecord &r) {
  auto it = c.page_categories.find(cat);
  if (it == c.page_categories.end())
    return std::nullopt;
  for (const auto &pattern : it->second) {
    if (pattern.size() > r.url_tokens.size())
      continue;
    bool ok = true;
    for (std::size_t i = 0; i < pattern.size(); ++i)
      if (pattern[i] != r.url_tokens[i])
        ok = false;
    if (ok) {
      std::string joined;
      for (std::size_t i = 0; i < pattern.size(); ++i)
        joined += (i ? "/" : "") + pattern[i];
      return joined;
    }
  }
  return std::nullopt;
}

inline bool same_volume_bucket(VolumeWindow w, const Date &a, const Date &b) {
  switch (w) {
  case VolumeWindow::daily:
    return a == b;
  case VolumeWindow::weekly:
    return a.to_days() - a.weekday() == b.to_days() - b.weekday();
  case VolumeWindow::monthly:
    return a.year == b.year && a.month == b.month;
  }
  return false;
}

} // namespace oracle_detail

inline DetectionReport brute_force_detection(const RuleConfig &c,
                                             const std::vector<UserSession> &sessions) {
  using namespace oracle_detail;
  const std::vector<std::string> sensitive = {"sensitive_product", "sensitive_service",
                                              "employee_contact", "employee_bio"};
  bool any_sensitive = false;
  for (const auto &cat : sensitive)
    if (c.keyword_categories.contains(cat) || c.page_categories.contains(cat))
      any_sensitive = true;
  const bool has_employee_only = c.page_categories.contains("employee_only");
  const bool has_engagement = c.page_categories.contains("newsletter_registration") ||
                              c.page_categories.contains("enquiry_form");

  DetectionReport report;
  report.total_sessions = sessions.size();
  std::set<std::string> flagged;
  for (const auto &s : sessions) {
    const bool foreign = is_foreign(c, s.key.country);
    auto emit = [&](const std::string &rule, std::vector<Evidence> ev) {
      if (ev.empty())
        return;
      report.matches.push_back({rule, s.session_id, std::move(ev)});
      flagged.insert(s.session_id);
    };

    if (any_sensitive) {
      std::vector<Evidence> ev;
      if (foreign) {
        for (const auto &r : s.records) {
          for (const auto &cat : sensitive) {
            auto kc = c.keyword_categories.find(cat);
            if (kc == c.keyword_categories.end())
              continue;
            std::set<std::string> seen;
            for (const auto &kw : r.keywords)
              if (kc->second.contains(kw) && seen.insert(kw).second)
                ev.push_back({r.record_id, "keyword:" + cat + ":" + kw});
          }
          for (const auto &cat : sensitive)
            if (auto p = first_pattern(c, cat, r))
              ev.push_back({r.record_id, "page:" + cat + ":" + *p});
        }
      }
      emit("sensitive_search_foreign", std::move(ev));
    }

    if (has_employee_only) {
      std::vector<Evidence> access;
      for (const auto &r : s.records)
        if (auto p = first_pattern(c, "employee_only", r))
          access.push_back({r.record_id, "page:employee_only:" + *p});
      if (foreign)
        emit("employee_only_access", access);

      std::size_t visits = 0;
      const auto last = s.key.date.to_days();
      const auto first = last - static_cast<std::int64_t>(c.repeat_access.window_days) + 1;
      for (const auto &other : sessions) {
        if (other.key.country != s.key.country || other.key.city != s.key.city)
          continue;
        const auto d = other.key.date.to_days();
        if (d < first || d > last)
          continue;
        for (const auto &r : other.records)
          if (first_pattern(c, "employee_only", r))
            ++visits;
      }
      if (visits >= c.repeat_access.min_occurrences)
        emit("repeat_employee_only_access", access);
    }

    {
      std::size_t located = 0;
      for (const auto &other : sessions)
        if (other.key.country == s.key.country && other.key.city == s.key.city &&
            same_volume_bucket(c.volume_threshold.window, other.key.date, s.key.date))
          located += other.records.size();
      const std::size_t observed = std::max(located, s.records.size());
      if (observed > c.volume_threshold.max_records)
        emit("volume_threshold",
             {{s.records.front().record_id, "volume:" + std::to_string(observed)}});
    }

    if (has_engagement) {
      std::vector<Evidence> ev;
      if (foreign)
        for (const auto &r : s.records)
          for (const std::string cat : {"newsletter_registration", "enquiry_form"})
            if (auto p = first_pattern(c, cat, r))
              ev.push_back({r.record_id, "page:" + cat + ":" + *p});
      emit("engagement_page_foreign", std::move(ev));
    }
  }
  report.flagged_sessions = flagged.size();
  report.fraction = sessions.empty() ? 0.0
                                     : static_cast<double>(flagged.size()) /
                                           static_cast<double>(sessions.size());
  return report;
}

} // namespace sentinel::testing

#endif // SENTINEL_TESTS_RULE_ORACLE_HPP
