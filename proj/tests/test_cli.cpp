#include "doctest.h"

#include <cstdlib>
#include <sstream>

#include <sys/wait.h>

#include "sentinel/cli.hpp"
#include "sentinel/models.hpp"
#include "sentinel/store.hpp"
#include "support.hpp"

using namespace sentinel;
using nlohmann::json;
using sentinel::testing::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run sentinel_run(std::vector<std::string> args) {
  args.insert(args.begin(), "sentinel");
  std::ostringstream out, err;
  const auto outcome = cli::run(args, out, err);
  return {outcome.exit_code, out.str(), err.str()};
}

json summary_of(const Run &r) {
  REQUIRE(r.code == 0);
  REQUIRE(r.out.find('\n') == r.out.size() - 1);
  return json::parse(r.out);
}

std::string p(const std::filesystem::path &path) { return path.string(); }

int binary_exit(const std::string &args) {
  const std::string cmd = std::string(SENTINEL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("help and usage errors") {
  auto r = sentinel_run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("sessionize") != std::string::npos);
  r = sentinel_run({"detect", "--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("--rules") != std::string::npos);

  TempDir dir;
  r = sentinel_run({"detect", "--in", p(dir / "s.ndjson"), "--out", p(dir / "d.ndjson")});
  CHECK(r.code == 2);
  CHECK(r.err.find("--rules") != std::string::npos);
  CHECK(sentinel_run({"bogus"}).code == 2);
  CHECK(sentinel_run({"train", "--data", "x", "--out", "y", "--epochs", "many"}).code == 2);
  CHECK(sentinel_run({"featurize", "--sessions", "s", "--out", "o", "--vocab-out", "v"}).code ==
        2);
  CHECK(sentinel_run({"featurize", "--sessions", "s", "--out", "o", "--vocab-out", "v",
                      "--labels", "l", "--from-detection", "d"})
            .code == 2);
  CHECK(sentinel_run({"--threads", "0", "synth", "--out", p(dir.path())}).code == 2);
}

TEST_CASE("runtime failures exit 1") {
  TempDir dir;
  auto r = sentinel_run({"ingest", "--in", p(dir / "missing.csv"), "--out", p(dir / "r.ndjson")});
  CHECK(r.code == 1);
  CHECK(r.err.find("error:") == 0);

  testing::spit(dir / "rules.json", R"({"business_countries": []})");
  testing::spit(dir / "s.ndjson", "");
  r = sentinel_run({"detect", "--in", p(dir / "s.ndjson"), "--rules", p(dir / "rules.json"),
                    "--out", p(dir / "d.ndjson")});
  CHECK(r.code == 1);
  CHECK(r.err.find("ConfigError") != std::string::npos);

  r = sentinel_run({"sessionize", "--in", p(dir / "s.ndjson"), "--out", p(dir / "s.ndjson")});
  CHECK(r.code == 1);
}

TEST_CASE("the full pipeline runs end to end") {
  TempDir dir;
  const auto corpus = dir / "corpus";
  auto s = summary_of(sentinel_run(
      {"synth", "--n", "1000", "--seed", "7", "--unknown-records", "20", "--out", p(corpus)}));
  CHECK(s["sessions"] == 1000);
  CHECK(s["suspicious"] == 60);

  s = summary_of(sentinel_run({"ingest", "--in", p(corpus / "traffic.ndjson"), "--out",
                               p(dir / "records.ndjson")}));
  CHECK(s["parsed"] == s["total_lines"]);
  CHECK(s["rejected"] == 0);

  s = summary_of(sentinel_run(
      {"sessionize", "--in", p(dir / "records.ndjson"), "--out", p(dir / "sessions.ndjson")}));
  CHECK(s["session_count"] == 1000);

  s = summary_of(sentinel_run({"explore", "--in", p(dir / "records.ndjson"), "--level",
                               "country", "--out", p(dir / "country.csv")}));
  CHECK(std::filesystem::file_size(dir / "country.csv") > 0);

  s = summary_of(sentinel_run({"detect", "--in", p(dir / "sessions.ndjson"), "--rules",
                               p(corpus / "rules.json"), "--out", p(dir / "detection.ndjson")}));
  CHECK(s["flagged_sessions"] == 60);

  s = summary_of(sentinel_run({"featurize", "--sessions", p(dir / "sessions.ndjson"), "--labels",
                               p(corpus / "truth.json"), "--out", p(dir / "data.ndjson"),
                               "--vocab-out", p(dir / "vocab.json")}));
  CHECK(s["examples"] == 1000);
  CHECK(s["suspicious"] == 60);

  s = summary_of(sentinel_run({"train", "--data", p(dir / "data.ndjson"), "--kind", "svm",
                               "--vocab", p(dir / "vocab.json"), "--epochs", "200", "--out",
                               p(dir / "model.json")}));
  CHECK(s["final_loss"].get<double>() <= s["initial_loss"].get<double>());
  const auto model = model_from_json(json::parse(testing::slurp(dir / "model.json")));
  CHECK(model.kind == ModelKind::svm);
  CHECK(model.hyper.epochs == 200);
  CHECK(model.vocabulary_digest ==
        vocabulary_from_json(json::parse(testing::slurp(dir / "vocab.json"))).digest());

  s = summary_of(sentinel_run({"evaluate", "--data", p(dir / "data.ndjson"), "--model",
                               p(dir / "model.json"), "--folds", "5", "--out",
                               p(dir / "cv.json")}));
  const auto report = cv_report_from_json(json::parse(testing::slurp(dir / "cv.json")));
  CHECK(report.k == 5);
  CHECK(report.kind == ModelKind::svm);
  CHECK(cv_report_to_json(report) == s);

  s = summary_of(sentinel_run({"featurize", "--sessions", p(dir / "sessions.ndjson"),
                               "--from-detection", p(dir / "detection.ndjson"), "--out",
                               p(dir / "data2.ndjson"), "--vocab-out", p(dir / "vocab2.json")}));
  CHECK(s["suspicious"] == 60);

  s = summary_of(sentinel_run({"featurize", "--sessions", p(dir / "sessions.ndjson"), "--labels",
                               p(corpus / "truth.json"), "--weighting", "counts", "--out",
                               p(dir / "data3.ndjson"), "--vocab-out", p(dir / "vocab3.json")}));
  CHECK(vocabulary_from_json(json::parse(testing::slurp(dir / "vocab3.json"))).weighting ==
        FeatureWeighting::counts);
  CHECK(sentinel_run({"featurize", "--sessions", p(dir / "sessions.ndjson"), "--labels",
                      p(corpus / "truth.json"), "--weighting", "tfidf", "--out",
                      p(dir / "data4.ndjson"), "--vocab-out", p(dir / "vocab4.json")})
            .code == 2);

  s = summary_of(sentinel_run({"init", "--state", p(dir / "state"), "--sessions",
                               p(dir / "sessions.ndjson"), "--rules", p(corpus / "rules.json")}));
  CHECK(s["flagged_sessions"] == 60);
  CHECK(load_state(dir / "state").sessions.size() == 1000);
  CHECK(sentinel_run({"init", "--state", p(dir / "state"), "--sessions",
                      p(dir / "sessions.ndjson"), "--rules", p(corpus / "rules.json")})
            .code == 1);
}

TEST_CASE("state directory comes from the environment") {
  TempDir dir;
  summary_of(sentinel_run({"synth", "--n", "50", "--seed", "2", "--out", p(dir / "c")}));
  summary_of(sentinel_run(
      {"ingest", "--in", p(dir / "c" / "traffic.ndjson"), "--out", p(dir / "r.ndjson")}));
  summary_of(
      sentinel_run({"sessionize", "--in", p(dir / "r.ndjson"), "--out", p(dir / "s.ndjson")}));
  ::setenv("SENTINEL_STATE", p(dir / "env-state").c_str(), 1);
  const auto r = sentinel_run(
      {"init", "--sessions", p(dir / "s.ndjson"), "--rules", p(dir / "c" / "rules.json")});
  ::unsetenv("SENTINEL_STATE");
  CHECK(r.code == 0);
  CHECK(std::filesystem::exists(dir / "env-state" / "manifest.json"));
  CHECK(sentinel_run({"init", "--sessions", p(dir / "s.ndjson"), "--rules",
                      p(dir / "c" / "rules.json")})
            .code == 2);
}

TEST_CASE("the installed binary reports exit codes") {
  CHECK(binary_exit("--help") == 0);
  CHECK(binary_exit("detect --in a --out b") == 2);
  CHECK(binary_exit("ingest --in /nonexistent/x.csv --out /tmp/sentinel-never-written") == 1);
}
