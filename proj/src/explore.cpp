#include "sentinel/explore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <unordered_map>

#include "sentinel/error.hpp"
#include "text_util.hpp"

namespace sentinel {

namespace {

struct LevelName {
  VolumeLevel level;
  std::string_view name;
};

constexpr LevelName kLevelNames[] = {
    {VolumeLevel::daily, "daily"},
    {VolumeLevel::weekly, "weekly"},
    {VolumeLevel::monthly, "monthly"},
    {VolumeLevel::yearly, "yearly"},
    {VolumeLevel::minute, "minute"},
    {VolumeLevel::hourly, "hourly"},
    {VolumeLevel::city, "city"},
    {VolumeLevel::country, "country"},
    {VolumeLevel::region, "region"},
    {VolumeLevel::webpage, "webpage"},
    {VolumeLevel::directory, "directory"},
    {VolumeLevel::keywords, "keywords"},
    {VolumeLevel::keyword_category, "keyword_category"},
};

std::string month_label(const Date &d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", d.year, d.month);
  return buf;
}

std::string hour_label(const Timestamp &t) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%s %02d:00", t.date.iso().c_str(),
                t.minute_of_day / 60);
  return buf;
}

std::optional<std::string> bucket_of(const TrafficRecord &r, VolumeLevel level,
                                     const ExploreOptions &options) {
  switch (level) {
  case VolumeLevel::daily:
    return r.timestamp.date.iso();
  case VolumeLevel::weekly:
    return r.timestamp.date.week_start().iso();
  case VolumeLevel::monthly:
    return month_label(r.timestamp.date);
  case VolumeLevel::yearly:
    return std::to_string(r.timestamp.date.year);
  case VolumeLevel::minute:
    return r.timestamp.iso();
  case VolumeLevel::hourly:
    return hour_label(r.timestamp);
  case VolumeLevel::city:
    return r.country + "/" + r.city;
  case VolumeLevel::country:
    return r.country;
  case VolumeLevel::region: {
    auto it = options.regions.find(r.country);
    return it == options.regions.end() ? std::string(kUnassignedRegion) : it->second;
  }
  case VolumeLevel::webpage:
    return "/" + detail::join(r.url_tokens, "/");
  case VolumeLevel::directory:
    return r.url_tokens.empty() ? std::string("/") : r.url_tokens.front();
  case VolumeLevel::keywords:
    if (r.keywords.empty())
      return std::nullopt;
    return detail::join(r.keywords, " ");
  case VolumeLevel::keyword_category:
    if (r.keywords.empty())
      return std::nullopt;
    for (const auto &[category, tokens] : options.keyword_categories)
      for (const auto &kw : r.keywords)
        if (tokens.contains(kw))
          return category;
    return std::string(kUncategorized);
  }
  return std::nullopt;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos)
    return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::optional<Date> parse_month(std::string_view s) {
  if (s.size() != 7)
    return std::nullopt;
  return Date::parse(std::string(s) + "-01");
}

std::optional<Date> parse_year(std::string_view s) {
  if (s.size() != 4)
    return std::nullopt;
  return Date::parse(std::string(s) + "-01-01");
}

} // namespace

std::string_view to_string(VolumeLevel level) {
  for (const auto &ln : kLevelNames)
    if (ln.level == level)
      return ln.name;
  return "unknown";
}

std::optional<VolumeLevel> parse_volume_level(std::string_view text) {
  for (const auto &ln : kLevelNames)
    if (ln.name == text)
      return ln.level;
  return std::nullopt;
}

bool is_time_level(VolumeLevel level) {
  switch (level) {
  case VolumeLevel::daily:
  case VolumeLevel::weekly:
  case VolumeLevel::monthly:
  case VolumeLevel::yearly:
  case VolumeLevel::minute:
  case VolumeLevel::hourly:
    return true;
  default:
    return false;
  }
}

const std::vector<VolumeLevel> &all_volume_levels() {
  static const std::vector<VolumeLevel> levels = [] {
    std::vector<VolumeLevel> v;
    for (const auto &ln : kLevelNames)
      v.push_back(ln.level);
    return v;
  }();
  return levels;
}

std::size_t VolumeTable::total() const {
  std::size_t sum = 0;
  for (const auto &row : rows)
    sum += row.count;
  return sum;
}

const RegionMap &default_region_map() {
  static const RegionMap regions = [] {
    RegionMap m;
    const std::pair<const char *, std::vector<const char *>> table[] = {
        {"Africa",
         {"Algeria", "Angola", "Cameroon", "Egypt", "Ethiopia", "Ghana",
          "Ivory Coast", "Kenya", "Libya", "Morocco", "Mozambique", "Nigeria",
          "Rwanda", "Senegal", "South Africa", "Sudan", "Tanzania", "Tunisia",
          "Uganda", "Zambia", "Zimbabwe"}},
        {"Americas",
         {"Argentina", "Bolivia", "Brazil", "Canada", "Chile", "Colombia",
          "Costa Rica", "Cuba", "Dominican Republic", "Ecuador", "Guatemala",
          "Jamaica", "Mexico", "Panama", "Paraguay", "Peru", "Puerto Rico",
          "United States", "Uruguay", "Venezuela"}},
        {"Asia",
         {"Afghanistan", "Bahrain", "Bangladesh", "Cambodia", "China",
          "Hong Kong", "India", "Indonesia", "Iran", "Iraq", "Israel", "Japan",
          "Jordan", "Kazakhstan", "Kuwait", "Lebanon", "Malaysia", "Mongolia",
          "Myanmar (Burma)", "Nepal", "North Korea", "Oman", "Pakistan",
          "Philippines", "Qatar", "Saudi Arabia", "Singapore", "South Korea",
          "Sri Lanka", "Syria", "Taiwan", "Thailand", "Turkey",
          "United Arab Emirates", "Uzbekistan", "Vietnam", "Yemen"}},
        {"Europe",
         {"Austria", "Belarus", "Belgium", "Bulgaria", "Croatia", "Czechia",
          "Denmark", "Estonia", "Finland", "France", "Germany", "Greece",
          "Hungary", "Iceland", "Ireland", "Italy", "Latvia", "Lithuania",
          "Luxembourg", "Netherlands", "Norway", "Poland", "Portugal",
          "Romania", "Russia", "Serbia", "Slovakia", "Slovenia", "Spain",
          "Sweden", "Switzerland", "Ukraine", "United Kingdom"}},
        {"Oceania", {"Australia", "Fiji", "New Zealand", "Papua New Guinea"}},
    };
    for (const auto &[region, countries] : table)
      for (const char *c : countries)
        m.emplace(c, region);
    return m;
  }();
  return regions;
}

VolumeTable aggregate_volume(std::span<const TrafficRecord> records,
                             VolumeLevel level, const ExploreOptions &options) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto &r : records)
    if (auto bucket = bucket_of(r, level, options))
      ++counts[*bucket];
  VolumeTable table;
  table.level = level;
  table.rows.reserve(counts.size());
  for (auto &[bucket, count] : counts)
    table.rows.push_back({bucket, count});
  std::sort(table.rows.begin(), table.rows.end(),
            [](const VolumeRow &a, const VolumeRow &b) { return a.bucket < b.bucket; });
  return table;
}

VolumeTable aggregate_volume(std::span<const TrafficRecord> records,
                             std::string_view level,
                             const ExploreOptions &options) {
  auto parsed = parse_volume_level(level);
  if (!parsed)
    throw Error(ErrorCode::unknown_level, std::string(level));
  return aggregate_volume(records, *parsed, options);
}

VolumeTable fill_time_gaps(const VolumeTable &table) {
  if (table.rows.size() < 2)
    return table;
  std::optional<Date> (*parse)(std::string_view) = nullptr;
  Date (*step)(const Date &) = nullptr;
  std::string (*label)(const Date &) = nullptr;
  switch (table.level) {
  case VolumeLevel::daily:
    parse = Date::parse;
    step = [](const Date &d) { return d.plus_days(1); };
    label = [](const Date &d) { return d.iso(); };
    break;
  case VolumeLevel::weekly:
    parse = Date::parse;
    step = [](const Date &d) { return d.plus_days(7); };
    label = [](const Date &d) { return d.iso(); };
    break;
  case VolumeLevel::monthly:
    parse = parse_month;
    step = [](const Date &d) {
      return d.month == 12 ? Date{d.year + 1, 1, 1} : Date{d.year, d.month + 1, 1};
    };
    label = month_label;
    break;
  case VolumeLevel::yearly:
    parse = parse_year;
    step = [](const Date &d) { return Date{d.year + 1, 1, 1}; };
    label = [](const Date &d) { return std::to_string(d.year); };
    break;
  default:
    return table;
  }
  auto first = parse(table.rows.front().bucket);
  auto last = parse(table.rows.back().bucket);
  if (!first || !last)
    return table;
  VolumeTable out;
  out.level = table.level;
  std::size_t next = 0;
  for (Date d = *first; d <= *last; d = step(d)) {
    std::string bucket = label(d);
    if (next < table.rows.size() && table.rows[next].bucket == bucket)
      out.rows.push_back(table.rows[next++]);
    else
      out.rows.push_back({std::move(bucket), 0});
  }
  return out;
}

double foreign_share(std::span<const TrafficRecord> records,
                     std::string_view home_country) {
  if (records.empty())
    return 0.0;
  std::size_t foreign = 0;
  for (const auto &r : records)
    if (r.country != home_country)
      ++foreign;
  return static_cast<double>(foreign) / static_cast<double>(records.size());
}

std::vector<std::pair<std::string, std::size_t>>
top_locations(std::span<const TrafficRecord> records, std::size_t k,
              std::optional<std::string> exclude) {
  if (k == 0)
    throw Error(ErrorCode::invalid_argument, "k must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto &r : records)
    if (!exclude || r.country != *exclude)
      ++counts[r.country];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto &a, const auto &b) { return a.second > b.second; });
  if (ranked.size() > k)
    ranked.resize(k);
  return ranked;
}

std::vector<AnomalyFlag> detect_volume_anomalies(const VolumeTable &table,
                                                 std::size_t window,
                                                 double z_threshold) {
  if (window < 2)
    throw Error(ErrorCode::window_too_small, std::to_string(window));
  if (!is_time_level(table.level))
    throw Error(ErrorCode::not_time_level, std::string(to_string(table.level)));

  std::vector<AnomalyFlag> flags;
  const auto &rows = table.rows;
  for (std::size_t i = window; i < rows.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = i - window; j < i; ++j)
      sum += static_cast<double>(rows[j].count);
    const double mean = sum / static_cast<double>(window);
    double ss = 0.0;
    for (std::size_t j = i - window; j < i; ++j) {
      const double d = static_cast<double>(rows[j].count) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(window));
    const double observed = static_cast<double>(rows[i].count);
    if (sd == 0.0) {
      if (observed > mean)
        flags.push_back({rows[i].bucket, rows[i].count, mean,
                         std::numeric_limits<double>::infinity()});
      continue;
    }
    const double z = (observed - mean) / sd;
    if (z > z_threshold)
      flags.push_back({rows[i].bucket, rows[i].count, mean, z});
  }
  return flags;
}

void write_volume_csv(std::ostream &out, const VolumeTable &table) {
  out << "bucket,count\n";
  for (const auto &row : table.rows)
    out << csv_field(row.bucket) << ',' << row.count << '\n';
}

void write_anomalies_csv(std::ostream &out, std::span<const AnomalyFlag> flags) {
  out << "bucket,observed,expected,score\n";
  for (const auto &f : flags) {
    char expected[32], score[32];
    std::snprintf(expected, sizeof expected, "%.6g", f.expected);
    std::snprintf(score, sizeof score, "%.6g", f.score);
    out << csv_field(f.bucket_label) << ',' << f.observed << ',' << expected
        << ',' << score << '\n';
  }
}

} // namespace sentinel
