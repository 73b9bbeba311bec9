#ifndef SENTINEL_TESTS_SUPPORT_HPP
#define SENTINEL_TESTS_SUPPORT_HPP

#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "sentinel/ingest.hpp"
#include "sentinel/random.hpp"
#include "sentinel/rules.hpp"
#include "sentinel/sessionize.hpp"

namespace sentinel::testing {

class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sentinel-test-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

inline TrafficRecord rec(std::string id, std::string_view date, std::string_view time,
                         std::string country, std::string city,
                         std::string url = "/", std::string keywords = "") {
  TrafficRecord r;
  r.record_id = std::move(id);
  r.timestamp.date = *Date::parse(date);
  r.timestamp.minute_of_day = *Timestamp::parse_time(time);
  r.country = std::move(country);
  r.city = std::move(city);
  r.raw_url = url;
  r.url_tokens = normalize_url(url);
  r.keywords = parse_keywords(keywords);
  return r;
}

/// Single session from records that share one key.
inline UserSession session_of(std::vector<TrafficRecord> records) {
  auto build = build_sessions(std::move(records), 1);
  if (build.sessions.size() != 1)
    throw std::logic_error("records do not form exactly one session");
  return build.sessions.front();
}

// Small random worlds for rule properties: few locations and dates so that
// the repeat and volume windows interact.
struct RuleWorld {
  RuleConfig config;
  std::vector<UserSession> sessions;
};

inline RuleWorld random_rule_world(SplitMix64 &rng, std::size_t max_sessions = 40) {
  auto lower = [](std::string s) {
    for (auto &ch : s)
      ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
  };
  static const std::vector<std::string> countries = {"United Kingdom", "India", "Germany",
                                                     "Syria", "Libya", "Ukraine"};
  static const std::vector<std::string> cities = {"Alpha", "Beta"};
  static const std::vector<std::string> pages = {
      "/careers/search-jobs", "/employee/resources", "/employee/resources/login",
      "/employee", "/newsletter/subscribe", "/contact/enquiry", "/about/our-people/bio",
      "/services/forensics", "/insights/report", "/"};
  static const std::vector<std::string> words = {
      "quarterly", "report", "contact", "email", "forensics", "biography",
      "pricing", "careers", "litigation", "phone"};

  RuleWorld world;
  RuleConfig &c = world.config;
  for (const auto &country : countries)
    if (rng.chance(0.4))
      c.business_countries.insert(rng.chance(0.5) ? country : lower(country));
  if (c.business_countries.empty())
    c.business_countries.insert(countries.front());

  auto maybe_words = [&](const std::string &cat) {
    if (!rng.chance(0.6))
      return;
    auto &set = c.keyword_categories[cat];
    const std::size_t n = rng.between(1, 3);
    for (std::size_t i = 0; i < n; ++i)
      set.insert(rng.pick(words));
  };
  for (const auto &cat : sensitive_categories())
    maybe_words(cat);

  auto maybe_pages = [&](std::string_view cat, std::vector<PagePattern> options) {
    if (!rng.chance(0.6))
      return;
    auto &list = c.page_categories[std::string(cat)];
    rng.shuffle(options);
    const std::size_t n = rng.between(1, static_cast<std::int64_t>(options.size()));
    list.assign(options.begin(), options.begin() + static_cast<std::ptrdiff_t>(n));
  };
  maybe_pages(category::employee_only, {{"employee"}, {"employee", "resources"}});
  maybe_pages(category::newsletter_registration, {{"newsletter"}, {"newsletter", "subscribe"}});
  maybe_pages(category::enquiry_form, {{"contact", "enquiry"}, {"contact"}});
  maybe_pages(category::employee_bio, {{"about", "our-people"}});
  maybe_pages(category::sensitive_service, {{"services"}});

  c.repeat_access.min_occurrences = rng.between(2, 4);
  c.repeat_access.window_days = rng.between(1, 6);
  c.volume_threshold.max_records = rng.between(3, 12);
  c.volume_threshold.window = static_cast<VolumeWindow>(rng.below(3));

  std::vector<TrafficRecord> records;
  const std::size_t n_groups = rng.between(1, static_cast<std::int64_t>(max_sessions));
  const Date base{2015, 1, 26};
  std::size_t id = 0;
  for (std::size_t g = 0; g < n_groups; ++g) {
    const std::string country = rng.pick(countries);
    const std::string city = rng.pick(cities);
    const Date date = base.plus_days(rng.between(0, 20));
    const std::size_t len = rng.between(3, 8);
    for (std::size_t i = 0; i < len; ++i) {
      TrafficRecord r;
      r.record_id = "r" + std::to_string(id++);
      r.timestamp = {date, static_cast<int>(rng.between(0, 1439))};
      r.country = country;
      r.city = city;
      r.raw_url = rng.pick(pages);
      r.url_tokens = normalize_url(r.raw_url);
      std::string kw;
      const std::size_t nk = rng.between(0, 2);
      for (std::size_t k = 0; k < nk; ++k)
        kw += rng.pick(words) + " ";
      r.keywords = parse_keywords(kw);
      records.push_back(std::move(r));
    }
  }
  world.sessions = build_sessions(std::move(records), 3).sessions;
  return world;
}

} // namespace sentinel::testing

#endif // SENTINEL_TESTS_SUPPORT_HPP
