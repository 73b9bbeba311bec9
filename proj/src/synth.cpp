#include "sentinel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "sentinel/error.hpp"
#include "sentinel/random.hpp"
#include "text_util.hpp"

namespace sentinel {

using nlohmann::json;

namespace {

constexpr double kKeywordChance = 0.4;

[[noreturn]] void infeasible(std::string why) {
  throw Error(ErrorCode::infeasible_profile, std::move(why));
}

struct Slot {
  std::size_t location;
  std::int64_t day;
};

// Free (location, day) pairs for one location pool, handed out in a seeded
// random order so every planned session gets its own session key.
class SlotPool {
public:
  SlotPool(std::string name, std::size_t locations, std::size_t days,
           SplitMix64 &rng)
      : name_(std::move(name)) {
    slots_.reserve(locations * days);
    for (std::size_t l = 0; l < locations; ++l)
      for (std::size_t d = 0; d < days; ++d)
        slots_.push_back({l, static_cast<std::int64_t>(d)});
    rng.shuffle(slots_);
  }

  Slot take() {
    if (next_ >= slots_.size())
      infeasible("not enough free " + name_ + " location-days for the requested sessions");
    return slots_[next_++];
  }

private:
  std::string name_;
  std::vector<Slot> slots_;
  std::size_t next_ = 0;
};

struct Draft {
  TrafficRecord record;
  std::size_t plan = 0;
  std::size_t position = 0;
};

std::vector<std::string> union_of(const std::vector<Archetype> &archetypes,
                                  std::vector<std::string> Archetype::*field) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  for (const auto &a : archetypes)
    for (const auto &item : a.*field)
      if (seen.insert(item).second)
        out.push_back(item);
  return out;
}

std::optional<std::string> page_category_hit(const RuleConfig &config,
                                             const std::string &page) {
  TrafficRecord probe;
  probe.url_tokens = normalize_url(page);
  for (const auto &[name, _] : config.page_categories)
    if (match_page(config, name, probe))
      return name;
  return std::nullopt;
}

std::optional<std::string> keyword_category_hit(const RuleConfig &config,
                                                const std::string &text) {
  for (const auto &token : parse_keywords(text))
    for (const auto &[name, tokens] : config.keyword_categories)
      if (tokens.contains(token))
        return name;
  return std::nullopt;
}

void check_profile(const GeneratorProfile &p, const RuleConfig &rules) {
  if (p.n_sessions == 0)
    throw Error(ErrorCode::invalid_argument, "n_sessions");
  if (!(p.suspicious_fraction >= 0.0 && p.suspicious_fraction <= 1.0))
    throw Error(ErrorCode::invalid_argument, "suspicious_fraction");
  if (!(p.overlap >= 0.0 && p.overlap <= 1.0))
    throw Error(ErrorCode::invalid_argument, "overlap");
  if (p.min_length < 3)
    throw Error(ErrorCode::invalid_argument, "min_length");
  if (p.max_length < p.min_length)
    throw Error(ErrorCode::invalid_argument, "max_length");
  if (p.days == 0)
    throw Error(ErrorCode::invalid_argument, "days");
  if (p.benign_archetypes.empty() || p.suspicious_archetypes.empty() ||
      p.business_locations.empty() || p.foreign_locations.empty())
    infeasible("archetype and location pools must be non-empty");
  if (rules.volume_threshold.max_records < p.max_length)
    infeasible("volume_threshold.max_records is below max_length; benign sessions would trip it");
  if (rules.volume_threshold.max_records + 10 >= 1440)
    infeasible("volume_threshold.max_records leaves no room inside one day");

  std::set<std::string> business;
  for (const auto &l : p.business_locations)
    business.insert(detail::to_lower(l.country));
  for (const auto &l : p.foreign_locations)
    if (business.contains(detail::to_lower(l.country)))
      infeasible("country " + l.country + " is both business and foreign");

  auto check_background = [&](const Archetype &a) {
    if (a.pages.empty())
      infeasible("archetype " + a.name + " has no pages");
    for (const auto &page : a.pages)
      if (auto hit = page_category_hit(rules, page))
        infeasible("background page " + page + " matches category " + *hit);
    for (const auto &kw : a.keywords)
      if (auto hit = keyword_category_hit(rules, kw))
        infeasible("background keyword " + kw + " matches category " + *hit);
  };
  for (const auto &a : p.benign_archetypes) {
    if (a.triggers)
      infeasible("benign archetype " + a.name + " declares a rule trigger");
    check_background(a);
  }
  for (const auto &a : p.suspicious_archetypes) {
    if (!a.triggers)
      infeasible("suspicious archetype " + a.name + " declares no rule trigger");
    check_background(a);
    auto require_pages = [&](std::initializer_list<std::string_view> cats) {
      if (a.trigger_pages.empty())
        infeasible("archetype " + a.name + " has no trigger pages");
      for (const auto &page : a.trigger_pages) {
        auto hit = page_category_hit(rules, page);
        if (!hit || std::find(cats.begin(), cats.end(), *hit) == cats.end())
          infeasible("trigger page " + page + " does not match its rule");
      }
    };
    switch (*a.triggers) {
    case RuleKind::sensitive_search_foreign:
      if (a.trigger_keywords.empty())
        infeasible("archetype " + a.name + " has no trigger keywords");
      for (const auto &kw : a.trigger_keywords) {
        auto hit = keyword_category_hit(rules, kw);
        const auto &s = sensitive_categories();
        if (!hit || std::find(s.begin(), s.end(), *hit) == s.end())
          infeasible("trigger keyword " + kw + " is not in a sensitive category");
      }
      break;
    case RuleKind::employee_only_access:
    case RuleKind::repeat_employee_only_access:
      require_pages({category::employee_only});
      break;
    case RuleKind::engagement_page_foreign:
      require_pages({category::newsletter_registration, category::enquiry_form});
      break;
    case RuleKind::volume_threshold:
      break;
    }
  }
}

bool foreign_scoped(RuleKind kind) {
  return kind == RuleKind::sensitive_search_foreign ||
         kind == RuleKind::employee_only_access ||
         kind == RuleKind::engagement_page_foreign;
}

} // namespace

std::vector<Archetype> GeneratorProfile::default_benign_archetypes() {
  return {
      Archetype{"job-seeker",
                {"/careers", "/careers/search-jobs", "/careers/apply",
                 "/careers/students", "/careers/experienced-hires",
                 "/about/locations", "/about/diversity-and-inclusion"},
                {"jobs", "internship", "analyst", "graduate", "consultant",
                 "benefits", "careers", "hiring"},
                std::nullopt, {}, {}},
      Archetype{"client-researcher",
                {"/services/disputes", "/services/energy", "/services/healthcare",
                 "/services/economics", "/industries/financial-services",
                 "/industries/life-sciences", "/industries/construction",
                 "/about/leadership"},
                {"energy", "disputes", "healthcare", "litigation", "construction",
                 "regulatory", "economics", "compliance"},
                std::nullopt, {}, {}},
      Archetype{"report-reader",
                {"/insights/reports/quarterly-outlook",
                 "/insights/reports/annual-review",
                 "/insights/articles/energy-transition", "/news/press-releases",
                 "/insights/webinars", "/insights/thought-leadership/japan"},
                {"quarterly report", "outlook", "webinar", "annual review",
                 "press", "japan", "insights", "trends"},
                std::nullopt, {}, {}},
  };
}

std::vector<Archetype> GeneratorProfile::default_suspicious_archetypes() {
  const std::vector<std::string> people_pages = {
      "/people/search",         "/people/directory",
      "/people/profile/j-smith", "/people/profile/a-kumar",
      "/people/profile/m-garcia", "/experts/directory",
      "/products/risk-analytics-platform"};
  const std::vector<std::string> people_keywords = {
      "director", "partner", "team", "staff", "managing", "expert"};
  const std::vector<std::string> intranet = {
      "/employee/resources/login", "/employee/resources/benefits-portal",
      "/employee/intranet/directory", "/employee/intranet/timesheet"};
  return {
      Archetype{"targeted-researcher", people_pages, people_keywords,
                RuleKind::sensitive_search_foreign, {},
                {"proprietary", "pricing", "roadmap", "algorithm", "prototype",
                 "merger", "acquisition", "forensic", "investigation",
                 "settlement", "email", "phone", "contact", "address",
                 "extension", "biography", "bio", "cv", "resume", "background"}},
      Archetype{"intranet-prober", people_pages, people_keywords,
                RuleKind::employee_only_access, intranet, {}},
      Archetype{"persistent-prober", people_pages, people_keywords,
                RuleKind::repeat_employee_only_access, intranet, {}},
      Archetype{"bulk-harvester", people_pages, people_keywords,
                RuleKind::volume_threshold, {}, {}},
      Archetype{"engagement-seeker", people_pages, people_keywords,
                RuleKind::engagement_page_foreign,
                {"/newsletter/subscribe", "/newsletter/register",
                 "/contact/enquiry", "/contact/request-information"},
                {}},
  };
}

std::vector<Location> GeneratorProfile::default_business_locations() {
  return {
      {"United States", "New York"},   {"United States", "Washington"},
      {"United States", "Chicago"},    {"United States", "Boston"},
      {"United States", "San Francisco"}, {"United States", "Houston"},
      {"United States", "Denver"},     {"United States", "Atlanta"},
      {"United States", "Seattle"},    {"United States", "Los Angeles"},
      {"United Kingdom", "London"},    {"United Kingdom", "Manchester"},
      {"United Kingdom", "Edinburgh"}, {"India", "Mumbai"},
      {"India", "New Delhi"},          {"India", "Bangalore"},
      {"Germany", "Berlin"},           {"Germany", "Munich"},
      {"Germany", "Frankfurt"},        {"Canada", "Toronto"},
      {"Canada", "Vancouver"},         {"France", "Paris"},
      {"Japan", "Tokyo"},              {"Japan", "Osaka"},
      {"Australia", "Sydney"},         {"Singapore", "Singapore"},
      {"Spain", "Madrid"},             {"Netherlands", "Amsterdam"},
      {"Hong Kong", "Hong Kong"},      {"United Arab Emirates", "Dubai"},
  };
}

std::vector<Location> GeneratorProfile::default_foreign_locations() {
  return {
      {"Syria", "Damascus"},   {"Syria", "Aleppo"},     {"Libya", "Tripoli"},
      {"Libya", "Benghazi"},   {"Ukraine", "Kyiv"},     {"Ukraine", "Kharkiv"},
      {"Ukraine", "Odesa"},    {"Belarus", "Minsk"},    {"Venezuela", "Caracas"},
      {"Yemen", "Sanaa"},      {"Iraq", "Baghdad"},     {"Iraq", "Basra"},
  };
}

RuleConfig GeneratorProfile::default_rule_template() {
  RuleConfig c;
  c.keyword_categories = {
      {"sensitive_product", {"proprietary", "pricing", "roadmap", "algorithm", "prototype"}},
      {"sensitive_service", {"merger", "acquisition", "forensic", "investigation", "settlement"}},
      {"employee_contact", {"email", "phone", "contact", "address", "extension"}},
      {"employee_bio", {"biography", "bio", "cv", "resume", "background"}},
  };
  c.page_categories = {
      {"employee_only", {{"employee", "resources"}, {"employee", "intranet"}}},
      {"newsletter_registration", {{"newsletter", "subscribe"}, {"newsletter", "register"}}},
      {"enquiry_form", {{"contact", "enquiry"}, {"contact", "request-information"}}},
  };
  c.repeat_access = {3, 7};
  c.volume_threshold = {40, VolumeWindow::daily};
  return c;
}

std::size_t GroundTruth::suspicious_count() const {
  return static_cast<std::size_t>(
      std::count_if(sessions.begin(), sessions.end(),
                    [](const PlannedSession &s) { return s.label == Label::suspicious; }));
}

std::map<std::string, Label> GroundTruth::labels() const {
  std::map<std::string, Label> out;
  for (const auto &s : sessions)
    out.emplace(s.session_id, s.label);
  return out;
}

RuleConfig companion_rule_config(const GeneratorProfile &profile) {
  RuleConfig c = profile.rule_template;
  c.business_countries.clear();
  for (const auto &l : profile.business_locations)
    c.business_countries.insert(l.country);
  return c;
}

SyntheticCorpus generate_corpus(const GeneratorProfile &profile) {
  const RuleConfig rules = companion_rule_config(profile);
  check_profile(profile, rules);

  SplitMix64 rng(profile.seed);
  const std::size_t n = profile.n_sessions;
  const auto n_suspicious = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * profile.suspicious_fraction));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i)
    order[i] = i;
  rng.shuffle(order);
  // archetype index per plan; suspicious plans use offset n_benign_archetypes
  std::vector<const Archetype *> archetype(n, nullptr);
  for (std::size_t rank = 0; rank < n; ++rank) {
    archetype[order[rank]] =
        rank < n_suspicious
            ? &profile.suspicious_archetypes[rank % profile.suspicious_archetypes.size()]
            : &rng.pick(profile.benign_archetypes);
  }

  SlotPool business_slots("business", profile.business_locations.size(), profile.days, rng);
  SlotPool foreign_slots("foreign", profile.foreign_locations.size(), profile.days, rng);

  const auto benign_pages = union_of(profile.benign_archetypes, &Archetype::pages);
  const auto benign_keywords = union_of(profile.benign_archetypes, &Archetype::keywords);
  const auto suspicious_pages = union_of(profile.suspicious_archetypes, &Archetype::pages);
  const auto suspicious_keywords = union_of(profile.suspicious_archetypes, &Archetype::keywords);
  const double cross = profile.overlap / 2.0;
  const std::int64_t first_day = profile.start_date.to_days();
  const auto &min_occ = rules.repeat_access.min_occurrences;
  const auto &max_records = rules.volume_threshold.max_records;

  std::vector<Draft> drafts;
  std::vector<PlannedSession> plans(n);

  for (std::size_t i = 0; i < n; ++i) {
    const Archetype &a = *archetype[i];
    const bool suspicious = a.triggers.has_value();
    PlannedSession &plan = plans[i];
    plan.label = suspicious ? Label::suspicious : Label::benign;
    plan.archetype = a.name;

    bool foreign = false;
    if (suspicious) {
      plan.rule_id = std::string(to_string(*a.triggers));
      foreign = foreign_scoped(*a.triggers);
    } else {
      foreign = rng.chance(cross);
    }
    const Slot slot = foreign ? foreign_slots.take() : business_slots.take();
    const Location &loc = foreign ? profile.foreign_locations[slot.location]
                                  : profile.business_locations[slot.location];
    plan.key = SessionKey{loc.country, loc.city, Date::from_days(first_day + slot.day)};

    std::size_t length = static_cast<std::size_t>(rng.between(
        static_cast<std::int64_t>(profile.min_length),
        static_cast<std::int64_t>(profile.max_length)));
    std::size_t triggers = 0;
    if (suspicious) {
      switch (*a.triggers) {
      case RuleKind::sensitive_search_foreign:
      case RuleKind::employee_only_access:
        triggers = static_cast<std::size_t>(
            rng.between(1, static_cast<std::int64_t>(std::max<std::size_t>(1, length / 3))));
        break;
      case RuleKind::repeat_employee_only_access:
        length = std::max(length, min_occ);
        triggers = static_cast<std::size_t>(rng.between(
            static_cast<std::int64_t>(min_occ),
            static_cast<std::int64_t>(std::max(min_occ, length / 2))));
        break;
      case RuleKind::volume_threshold:
        length = max_records + static_cast<std::size_t>(rng.between(1, 10));
        break;
      case RuleKind::engagement_page_foreign:
        triggers = static_cast<std::size_t>(rng.between(1, 2));
        break;
      }
    }

    std::vector<bool> is_trigger(length, false);
    {
      std::vector<std::size_t> positions(length);
      for (std::size_t p = 0; p < length; ++p)
        positions[p] = p;
      rng.shuffle(positions);
      for (std::size_t t = 0; t < triggers; ++t)
        is_trigger[positions[t]] = true;
    }

    const std::int64_t max_step =
        std::min<std::int64_t>(5, 1439 / static_cast<std::int64_t>(std::max<std::size_t>(1, length - 1)));
    std::vector<int> minutes(length, 0);
    for (std::size_t p = 1; p < length; ++p)
      minutes[p] = minutes[p - 1] + static_cast<int>(rng.between(1, max_step));
    const int start = static_cast<int>(rng.between(0, 1439 - minutes.back()));

    const auto &own_pages = a.pages;
    const auto &own_keywords = a.keywords;
    const auto &other_pages = suspicious ? benign_pages : suspicious_pages;
    const auto &other_keywords = suspicious ? benign_keywords : suspicious_keywords;

    for (std::size_t p = 0; p < length; ++p) {
      Draft d;
      d.plan = i;
      d.position = p;
      TrafficRecord &r = d.record;
      r.timestamp = Timestamp{plan.key.date, start + minutes[p]};
      r.country = loc.country;
      r.city = loc.city;

      std::string keyword_text;
      if (is_trigger[p] && !a.trigger_pages.empty()) {
        r.raw_url = rng.pick(a.trigger_pages);
      } else {
        r.raw_url = rng.chance(cross) ? rng.pick(other_pages) : rng.pick(own_pages);
      }
      if (is_trigger[p] && !a.trigger_keywords.empty()) {
        keyword_text = rng.pick(a.trigger_keywords);
        if (!own_keywords.empty() && rng.chance(0.5))
          keyword_text += " " + rng.pick(own_keywords);
      } else if (!own_keywords.empty() && rng.chance(kKeywordChance)) {
        keyword_text = rng.chance(cross) ? rng.pick(other_keywords) : rng.pick(own_keywords);
      }
      r.raw_url = "https://www.example.com" + r.raw_url;
      r.url_tokens = normalize_url(r.raw_url);
      r.keywords = parse_keywords(keyword_text);
      if (rng.chance(0.9))
        r.duration_seconds = rng.between(5, 600);
      drafts.push_back(std::move(d));
    }
  }

  for (std::size_t u = 0; u < profile.unknown_location_records; ++u) {
    Draft d;
    d.plan = n;
    d.position = u;
    TrafficRecord &r = d.record;
    const auto day = rng.between(0, static_cast<std::int64_t>(profile.days) - 1);
    r.timestamp = Timestamp{Date::from_days(first_day + day),
                            static_cast<int>(rng.between(0, 1439))};
    const Location &loc = rng.pick(profile.business_locations);
    if (rng.chance(0.5)) {
      r.country = "Unknown";
      r.city = "(not set)";
    } else {
      r.country = loc.country;
      r.city = rng.chance(0.5) ? "(not set)" : "Unknown";
    }
    r.raw_url = "https://www.example.com" + rng.pick(benign_pages);
    r.url_tokens = normalize_url(r.raw_url);
    drafts.push_back(std::move(d));
  }

  std::sort(drafts.begin(), drafts.end(), [](const Draft &x, const Draft &y) {
    if (x.record.timestamp != y.record.timestamp)
      return x.record.timestamp < y.record.timestamp;
    if (x.plan != y.plan)
      return x.plan < y.plan;
    return x.position < y.position;
  });

  SyntheticCorpus corpus;
  corpus.rules = rules;
  corpus.truth.seed = profile.seed;
  corpus.records.reserve(drafts.size());
  std::vector<std::vector<std::pair<std::size_t, std::string>>> members(n);
  for (std::size_t line = 0; line < drafts.size(); ++line) {
    Draft &d = drafts[line];
    d.record.record_id = profile.source_name + ":" + std::to_string(line + 1);
    if (d.plan < n)
      members[d.plan].emplace_back(d.position, d.record.record_id);
    corpus.records.push_back(std::move(d.record));
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(members[i].begin(), members[i].end());
    for (auto &[_, id] : members[i])
      plans[i].record_ids.push_back(std::move(id));
    plans[i].session_id = make_session_id(plans[i].key, plans[i].record_ids.front());
  }
  std::sort(plans.begin(), plans.end(), [](const PlannedSession &x, const PlannedSession &y) {
    return session_key_less(x.key, y.key);
  });
  corpus.truth.sessions = std::move(plans);
  return corpus;
}

json truth_to_json(const GroundTruth &truth) {
  json sessions = json::array();
  for (const auto &s : truth.sessions) {
    sessions.push_back({{"session_id", s.session_id},
                        {"label", to_string(s.label)},
                        {"rule_id", s.rule_id ? json(*s.rule_id) : json(nullptr)},
                        {"archetype", s.archetype},
                        {"country", s.key.country},
                        {"city", s.key.city},
                        {"date", s.key.date.iso()},
                        {"record_ids", s.record_ids}});
  }
  return json{{"seed", truth.seed}, {"sessions", std::move(sessions)}};
}

GroundTruth truth_from_json(const json &doc) {
  try {
    GroundTruth truth;
    truth.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto &s : doc.at("sessions")) {
      PlannedSession p;
      p.session_id = s.at("session_id").get<std::string>();
      auto label = parse_label(s.at("label").get<std::string>());
      if (!label)
        throw Error(ErrorCode::invalid_format, "label of " + p.session_id);
      p.label = *label;
      if (!s.at("rule_id").is_null())
        p.rule_id = s.at("rule_id").get<std::string>();
      p.archetype = s.at("archetype").get<std::string>();
      auto date = Date::parse(s.at("date").get<std::string>());
      if (!date)
        throw Error(ErrorCode::invalid_format, "date of " + p.session_id);
      p.key = SessionKey{s.at("country").get<std::string>(),
                         s.at("city").get<std::string>(), *date};
      p.record_ids = s.at("record_ids").get<std::vector<std::string>>();
      truth.sessions.push_back(std::move(p));
    }
    return truth;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::invalid_format, e.what());
  }
}

void write_corpus(const SyntheticCorpus &corpus, const std::filesystem::path &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw Error(ErrorCode::io_failure, "cannot create " + dir.string());
  auto open = [&](const char *name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error(ErrorCode::io_failure, "cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("traffic.ndjson");
    write_records(out, corpus.records);
  }
  {
    auto out = open("truth.json");
    out << truth_to_json(corpus.truth).dump() << '\n';
  }
  {
    auto out = open("rules.json");
    out << rule_config_to_json(corpus.rules).dump(2) << '\n';
  }
}

} // namespace sentinel
