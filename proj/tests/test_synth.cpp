#include "doctest.h"

#include <map>
#include <set>

#include "sentinel/error.hpp"
#include "sentinel/rules.hpp"
#include "sentinel/sessionize.hpp"
#include "sentinel/synth.hpp"
#include "support.hpp"

using namespace sentinel;

namespace {

GeneratorProfile small_profile(std::uint64_t seed, std::size_t n = 400) {
  GeneratorProfile p;
  p.seed = seed;
  p.n_sessions = n;
  return p;
}

std::vector<std::string> record_ids(const UserSession &s) {
  std::vector<std::string> ids;
  for (const auto &r : s.records)
    ids.push_back(r.record_id);
  return ids;
}

} // namespace

TEST_CASE("suspicious count is the rounded fraction") {
  auto p = small_profile(3, 1000);
  const auto corpus = generate_corpus(p);
  CHECK(corpus.truth.sessions.size() == 1000);
  CHECK(corpus.truth.suspicious_count() == 60);

  p.n_sessions = 12746;
  p.days = 1000;
  p.suspicious_fraction = 766.0 / 12746.0;
  CHECK(generate_corpus(p).truth.suspicious_count() == 766);

  p = small_profile(1, 10);
  p.suspicious_fraction = 0.25; // 2.5 rounds half away from zero
  CHECK(generate_corpus(p).truth.suspicious_count() == 3);
}

TEST_CASE("same seed gives byte-identical corpora, different seeds differ") {
  testing::TempDir a, b, c;
  write_corpus(generate_corpus(small_profile(7)), a.path());
  write_corpus(generate_corpus(small_profile(7)), b.path());
  write_corpus(generate_corpus(small_profile(8)), c.path());
  for (const char *name : {"traffic.ndjson", "truth.json", "rules.json"}) {
    CHECK(testing::slurp(a / name) == testing::slurp(b / name));
    CHECK_FALSE(testing::slurp(a / name).empty());
  }
  CHECK(testing::slurp(a / "traffic.ndjson") != testing::slurp(c / "traffic.ndjson"));
}

TEST_CASE("sessionization reconstructs the plan exactly") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto p = small_profile(seed);
    p.overlap = seed == 3 ? 0.5 : 0.0;
    const auto corpus = generate_corpus(p);
    const auto build = build_sessions(corpus.records);
    REQUIRE(build.sessions.size() == corpus.truth.sessions.size());
    CHECK(build.dropped.total() == 0);
    for (std::size_t i = 0; i < build.sessions.size(); ++i) {
      const auto &s = build.sessions[i];
      const auto &plan = corpus.truth.sessions[i];
      CHECK(s.session_id == plan.session_id);
      CHECK(s.key == plan.key);
      CHECK(record_ids(s) == plan.record_ids);
      CHECK(s.length() >= 3);
      CHECK(s.length() >= p.min_length);
    }
  }
}

TEST_CASE("planted sessions trigger their rule and benign sessions trigger none") {
  for (double overlap : {0.0, 1.0}) {
    auto p = small_profile(11, 600);
    p.overlap = overlap;
    const auto corpus = generate_corpus(p);
    const auto build = build_sessions(corpus.records);
    const auto report = run_detection(compile_ruleset(corpus.rules), build.sessions);

    std::map<std::string, std::set<std::string>> rules_by_session;
    for (const auto &m : report.matches)
      rules_by_session[m.session_id].insert(m.rule_id);
    std::set<std::string> kinds;
    for (const auto &plan : corpus.truth.sessions) {
      INFO(plan.session_id << " " << plan.archetype);
      if (plan.label == Label::suspicious) {
        REQUIRE(plan.rule_id);
        kinds.insert(*plan.rule_id);
        CHECK(rules_by_session[plan.session_id].contains(*plan.rule_id));
      } else {
        CHECK_FALSE(plan.rule_id);
        CHECK_FALSE(rules_by_session.contains(plan.session_id));
      }
    }
    CHECK(kinds.size() == 5);
    CHECK(report.flagged_sessions == corpus.truth.suspicious_count());
  }
}

TEST_CASE("unknown-location noise is dropped by sessionization") {
  auto p = small_profile(4, 100);
  p.unknown_location_records = 37;
  const auto corpus = generate_corpus(p);
  const auto build = build_sessions(corpus.records);
  CHECK(build.dropped.unkeyed == 37);
  CHECK(build.sessions.size() == 100);
}

TEST_CASE("infeasible and invalid profiles are rejected") {
  auto p = small_profile(1, 1000);
  p.days = 1; // 42 location-days for 1000 sessions
  CHECK_THROWS_WITH_AS(generate_corpus(p), doctest::Contains("InfeasibleProfile"), Error);

  p = small_profile(1);
  p.benign_archetypes.front().pages.push_back("employee/resources/login");
  try {
    generate_corpus(p);
    FAIL("expected infeasible profile");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::infeasible_profile);
  }

  p = small_profile(1);
  p.min_length = 2;
  CHECK_THROWS_AS(generate_corpus(p), Error);
  p = small_profile(1);
  p.suspicious_fraction = 1.5;
  CHECK_THROWS_AS(generate_corpus(p), Error);
  p = small_profile(1);
  p.overlap = -0.1;
  CHECK_THROWS_AS(generate_corpus(p), Error);
}

TEST_CASE("ground truth serializes losslessly") {
  const auto corpus = generate_corpus(small_profile(5, 200));
  CHECK(truth_from_json(truth_to_json(corpus.truth)) == corpus.truth);
  const auto labels = corpus.truth.labels();
  CHECK(labels.size() == 200);
  std::size_t suspicious = 0;
  for (const auto &[_, l] : labels)
    suspicious += l == Label::suspicious;
  CHECK(suspicious == corpus.truth.suspicious_count());
}

TEST_CASE("companion rules parse and name the business countries") {
  const GeneratorProfile p;
  const RuleConfig c = companion_rule_config(p);
  CHECK(parse_rule_config(rule_config_to_json(c)) == c);
  for (const auto &l : p.business_locations)
    CHECK(c.business_countries.contains(l.country));
  CHECK(compile_ruleset(c).rules().size() == 5);
}

TEST_CASE("records are chronological and uniquely identified") {
  const auto corpus = generate_corpus(small_profile(9));
  std::set<std::string> ids;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    CHECK(ids.insert(corpus.records[i].record_id).second);
    if (i > 0)
      CHECK_FALSE(corpus.records[i].timestamp < corpus.records[i - 1].timestamp);
  }
}
