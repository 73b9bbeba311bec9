#include "sentinel/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"
#include "sentinel/error.hpp"
#include "sentinel/explore.hpp"
#include "sentinel/features.hpp"
#include "sentinel/ingest.hpp"
#include "sentinel/models.hpp"
#include "sentinel/rules.hpp"
#include "sentinel/service.hpp"
#include "sentinel/sessionize.hpp"
#include "sentinel/store.hpp"
#include "sentinel/synth.hpp"

namespace sentinel::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Flags {
  unsigned threads = 1;

  std::string in, out, format;
  std::size_t min_length = 3;

  std::string level, anomalies_out, categories;
  bool fill_gaps = false;
  std::size_t window = 28;
  double z = 3.0;

  std::string rules;

  std::string sessions, labels, from_detection, vocab_out;
  std::size_t min_df = 1;
  std::string weighting = "presence";

  std::string data, kind = "logistic", vocab, model;
  std::uint64_t seed = 0;
  Hyper hyper;
  std::size_t folds = 5;

  std::size_t n = 1000;
  double suspicious_fraction = 0.06;
  std::uint64_t synth_seed = 1;
  double overlap = 0.0;
  std::size_t days = 730;
  std::size_t unknown_records = 0;

  std::string state, host = "127.0.0.1", static_dir;
  int port = 8080;
};

void guard_output(const std::string &out, std::initializer_list<std::string> inputs) {
  std::error_code ec;
  const fs::path target = fs::weakly_canonical(out, ec);
  for (const auto &in : inputs) {
    if (in.empty())
      continue;
    if (fs::weakly_canonical(in, ec) == target)
      throw Error(ErrorCode::invalid_argument, "output would overwrite input " + in);
  }
}

template <typename Writer> void write_output(const std::string &path, Writer &&writer) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file)
    throw Error(ErrorCode::io_failure, "cannot open " + path);
  writer(file);
  file.flush();
  if (!file)
    throw Error(ErrorCode::io_failure, "cannot write " + path);
}

json read_json_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::io_failure, "cannot open " + path);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded())
    throw Error(ErrorCode::invalid_format, path + ": invalid JSON");
  return doc;
}

std::ifstream open_input(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::io_failure, "cannot open " + path);
  return in;
}

// Accepts a ground-truth document ({"sessions": [...]}) or NDJSON rows
// {session_id, label}.
std::map<std::string, Label> read_label_file(const std::string &path) {
  std::ifstream in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  json whole = json::parse(text, nullptr, false);
  if (!whole.is_discarded() && whole.is_object() && whole.contains("sessions"))
    return truth_from_json(whole).labels();

  std::map<std::string, Label> labels;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(lines, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    json row = json::parse(line, nullptr, false);
    if (row.is_discarded() || !row.is_object() || !row.contains("session_id") ||
        !row.contains("label"))
      throw Error(ErrorCode::invalid_format, path + ":" + std::to_string(line_number));
    std::optional<Label> label;
    if (row["label"].is_string())
      label = parse_label(row["label"].get<std::string>());
    else if (row["label"].is_number_integer() && (row["label"] == 0 || row["label"] == 1))
      label = static_cast<Label>(row["label"].get<int>());
    if (!label)
      throw Error(ErrorCode::invalid_format, path + ":" + std::to_string(line_number));
    labels[row["session_id"].get<std::string>()] = *label;
  }
  return labels;
}

InputFormat resolve_format(const Flags &f) {
  if (!f.format.empty()) {
    auto format = parse_input_format(f.format);
    if (!format)
      throw Error(ErrorCode::invalid_argument, "format " + f.format);
    return *format;
  }
  return fs::path(f.in).extension() == ".csv" ? InputFormat::csv : InputFormat::ndjson;
}

json cmd_ingest(const Flags &f) {
  guard_output(f.out, {f.in});
  Corpus corpus = load_corpus_file(f.in, resolve_format(f), f.threads);
  write_output(f.out, [&](std::ostream &o) { write_records(o, corpus.records); });
  json reasons = json::object();
  for (const auto &[reason, count] : corpus.report.reject_reasons)
    reasons[reason] = count;
  return json{{"total_lines", corpus.report.total_lines},
              {"parsed", corpus.report.parsed},
              {"rejected", corpus.report.rejected},
              {"reject_reasons", std::move(reasons)}};
}

json cmd_sessionize(const Flags &f) {
  guard_output(f.out, {f.in});
  Corpus corpus = load_corpus_file(f.in, InputFormat::ndjson, f.threads);
  SessionBuild build = build_sessions(std::move(corpus.records), f.min_length);
  write_output(f.out, [&](std::ostream &o) { write_sessions(o, build.sessions); });
  const SessionSummary summary = summarize_sessions(build.sessions);
  return json{{"session_count", summary.session_count},
              {"min_length", summary.min_length},
              {"mean_length", summary.mean_length},
              {"rejected_lines", corpus.report.rejected},
              {"dropped", {{"unkeyed", build.dropped.unkeyed},
                           {"undersized", build.dropped.undersized}}}};
}

json cmd_explore(const Flags &f) {
  guard_output(f.out, {f.in, f.categories});
  Corpus corpus = load_corpus_file(f.in, InputFormat::ndjson, f.threads);
  ExploreOptions options;
  if (!f.categories.empty()) {
    json doc = read_json_file(f.categories);
    if (!doc.is_object())
      throw Error(ErrorCode::invalid_format, f.categories + ": expected an object");
    for (const auto &[name, tokens] : doc.items()) {
      auto &set = options.keyword_categories[name];
      for (const auto &token : tokens)
        for (const auto &kw : parse_keywords(token.get<std::string>()))
          set.insert(kw);
    }
  }
  VolumeTable table = aggregate_volume(corpus.records, f.level, options);
  if (f.fill_gaps)
    table = fill_time_gaps(table);
  write_output(f.out, [&](std::ostream &o) { write_volume_csv(o, table); });
  json summary{{"level", to_string(table.level)},
               {"buckets", table.rows.size()},
               {"total", table.total()}};
  if (!f.anomalies_out.empty()) {
    guard_output(f.anomalies_out, {f.in});
    const auto flags = detect_volume_anomalies(table, f.window, f.z);
    write_output(f.anomalies_out, [&](std::ostream &o) { write_anomalies_csv(o, flags); });
    summary["anomalies"] = flags.size();
  }
  return summary;
}

json cmd_detect(const Flags &f) {
  guard_output(f.out, {f.in, f.rules});
  const RuleSet rules = compile_ruleset(load_rule_config(f.rules));
  const auto sessions = read_sessions_file(f.in);
  const DetectionReport report = run_detection(rules, sessions);
  write_output(f.out, [&](std::ostream &o) { write_detection(o, report); });
  return json{{"total_sessions", report.total_sessions},
              {"flagged_sessions", report.flagged_sessions},
              {"fraction", report.fraction},
              {"matches", report.matches.size()}};
}

json cmd_featurize(const Flags &f) {
  guard_output(f.out, {f.sessions, f.labels, f.from_detection});
  guard_output(f.vocab_out, {f.sessions, f.labels, f.from_detection, f.out});
  const auto sessions = read_sessions_file(f.sessions);
  std::map<std::string, Label> labels;
  if (!f.labels.empty()) {
    labels = read_label_file(f.labels);
  } else {
    std::ifstream in = open_input(f.from_detection);
    const auto flagged = read_detection(in).flagged_ids();
    for (const auto &s : sessions)
      labels[s.session_id] = flagged.contains(s.session_id) ? Label::suspicious : Label::benign;
  }
  std::vector<UserSession> labeled;
  for (const auto &s : sessions)
    if (labels.contains(s.session_id))
      labeled.push_back(s);
  const Vocabulary vocab =
      build_vocabulary(labeled, f.min_df, *parse_feature_weighting(f.weighting));
  const LabeledDataset ds = assemble_dataset(labeled, labels, vocab);
  write_output(f.out, [&](std::ostream &o) { write_dataset(o, ds); });
  write_output(f.vocab_out,
               [&](std::ostream &o) { o << vocabulary_to_json(vocab).dump() << '\n'; });
  return json{{"examples", ds.size()},
              {"benign", ds.count(Label::benign)},
              {"suspicious", ds.count(Label::suspicious)},
              {"dimension", ds.dimension},
              {"vocabulary_digest", vocab.digest()}};
}

LabeledDataset load_dataset(const std::string &path) {
  std::ifstream in = open_input(path);
  return read_dataset(in);
}

json cmd_train(const Flags &f) {
  guard_output(f.out, {f.data, f.vocab});
  auto kind = parse_model_kind(f.kind);
  if (!kind)
    throw Error(ErrorCode::invalid_argument, "kind " + f.kind);
  Hyper hyper = f.hyper;
  hyper.seed = f.seed;
  hyper.validate();
  const LabeledDataset ds = load_dataset(f.data);
  LinearModel model = train(ds, hyper, *kind);
  if (!f.vocab.empty()) {
    const Vocabulary vocab = vocabulary_from_json(read_json_file(f.vocab));
    if (vocab.dimension() != ds.dimension)
      throw Error(ErrorCode::dimension_mismatch, "vocabulary does not match dataset");
    model.vocabulary_digest = vocab.digest();
  }
  write_output(f.out, [&](std::ostream &o) { o << model_to_json(model).dump() << '\n'; });
  const Metrics fit = compute_metrics(predict_labels(model, ds), ds.labels);
  const LinearModel zero{*kind, std::vector<double>(ds.dimension, 0.0), 0.0, hyper, {}};
  return json{{"kind", to_string(*kind)},
              {"examples", ds.size()},
              {"dimension", ds.dimension},
              {"initial_loss", loss_and_gradient(zero, ds, hyper).loss},
              {"final_loss", loss_and_gradient(model, ds, hyper).loss},
              {"training_metrics", metrics_to_json(fit)}};
}

json cmd_evaluate(const Flags &f) {
  if (!f.out.empty())
    guard_output(f.out, {f.data, f.model});
  const LabeledDataset ds = load_dataset(f.data);
  const LinearModel model = model_from_json(read_json_file(f.model));
  if (model.dimension() != ds.dimension)
    throw Error(ErrorCode::dimension_mismatch, "model does not match dataset");
  const CVReport report = cross_validate(ds, f.folds, model.kind, model.hyper, f.threads);
  json doc = cv_report_to_json(report);
  if (!f.out.empty())
    write_output(f.out, [&](std::ostream &o) { o << doc.dump(2) << '\n'; });
  return doc;
}

json cmd_synth(const Flags &f) {
  GeneratorProfile profile;
  profile.n_sessions = f.n;
  profile.suspicious_fraction = f.suspicious_fraction;
  profile.seed = f.synth_seed;
  profile.overlap = f.overlap;
  profile.days = f.days;
  profile.unknown_location_records = f.unknown_records;
  const SyntheticCorpus corpus = generate_corpus(profile);
  write_corpus(corpus, f.out);
  return json{{"records", corpus.records.size()},
              {"sessions", corpus.truth.sessions.size()},
              {"suspicious", corpus.truth.suspicious_count()},
              {"seed", corpus.truth.seed}};
}

json cmd_init(const Flags &f) {
  if (fs::exists(fs::path(f.state) / "manifest.json"))
    throw Error(ErrorCode::invalid_argument, "state already initialized: " + f.state);
  AppState state = make_state(read_sessions_file(f.sessions), load_rule_config(f.rules));
  save_state(state, f.state);
  return json{{"state", f.state},
              {"total_sessions", state.detection.total_sessions},
              {"flagged_sessions", state.detection.flagged_sessions}};
}

void cmd_serve(const Flags &f, std::ostream &out) {
  ServiceOptions options;
  options.state_dir = fs::path(f.state);
  if (!f.rules.empty())
    options.rules_path = fs::path(f.rules);
  options.threads = f.threads;
  TriageService service = TriageService::open(std::move(options));
  httplib::Server server;
  std::optional<fs::path> static_dir;
  if (!f.static_dir.empty())
    static_dir = fs::path(f.static_dir);
  service.mount(server, static_dir);
  out << "listening on http://" << f.host << ":" << f.port << std::endl;
  if (!server.listen(f.host, f.port))
    throw Error(ErrorCode::io_failure, "cannot listen on " + f.host + ":" +
                                           std::to_string(f.port));
}

} // namespace

CommandOutcome run(const std::vector<std::string> &argv, std::ostream &out,
                   std::ostream &err) {
  Flags f;
  CLI::App app{"Web-traffic forensics pipeline"};
  app.name(argv.empty() ? "sentinel" : fs::path(argv[0]).filename().string());
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.add_option("--threads", f.threads, "Worker thread cap")
      ->check(CLI::Range(1u, 256u));

  auto *ingest = app.add_subcommand("ingest", "Parse raw traffic into normalized NDJSON records");
  ingest->add_option("--format", f.format, "csv or ndjson (default: from extension)");
  ingest->add_option("--in", f.in, "Raw traffic file")->required();
  ingest->add_option("--out", f.out, "Normalized records (NDJSON)")->required();

  auto *sessionize = app.add_subcommand("sessionize", "Group records into location/date sessions");
  sessionize->add_option("--in", f.in, "Normalized records (NDJSON)")->required();
  sessionize->add_option("--out", f.out, "Sessions (NDJSON)")->required();
  sessionize->add_option("--min-length", f.min_length, "Minimum records per session")
      ->check(CLI::PositiveNumber);

  auto *explore = app.add_subcommand("explore", "Aggregate traffic volume at one level");
  explore->add_option("--in", f.in, "Normalized records (NDJSON)")->required();
  explore->add_option("--level", f.level, "Aggregation level")->required();
  explore->add_option("--out", f.out, "Volume table (CSV)")->required();
  explore->add_flag("--fill-gaps", f.fill_gaps, "Insert zero buckets in time tables");
  explore->add_option("--categories", f.categories, "Keyword category dictionary (JSON)");
  explore->add_option("--anomalies", f.anomalies_out, "Write volume anomalies (CSV)");
  explore->add_option("--window", f.window, "Anomaly trailing window");
  explore->add_option("--z", f.z, "Anomaly z-score threshold");

  auto *detect = app.add_subcommand("detect", "Apply detection rules to sessions");
  detect->add_option("--in", f.in, "Sessions (NDJSON)")->required();
  detect->add_option("--rules", f.rules, "Rule configuration (JSON)")->required();
  detect->add_option("--out", f.out, "Detection report (NDJSON)")->required();

  auto *featurize = app.add_subcommand("featurize", "Build a labeled feature dataset");
  featurize->add_option("--sessions", f.sessions, "Sessions (NDJSON)")->required();
  auto *labels_opt =
      featurize->add_option("--labels", f.labels, "Ground truth JSON or label NDJSON");
  auto *detection_opt = featurize->add_option(
      "--from-detection", f.from_detection, "Label flagged sessions suspicious, others benign");
  labels_opt->excludes(detection_opt);
  featurize->add_option("--min-df", f.min_df, "Minimum document frequency")
      ->check(CLI::PositiveNumber);
  featurize->add_option("--weighting", f.weighting, "presence or counts")
      ->check(CLI::IsMember({"presence", "counts"}));
  featurize->add_option("--out", f.out, "Dataset (NDJSON)")->required();
  featurize->add_option("--vocab-out", f.vocab_out, "Vocabulary (JSON)")->required();

  auto *train_cmd = app.add_subcommand("train", "Train a linear model");
  train_cmd->add_option("--data", f.data, "Dataset (NDJSON)")->required();
  train_cmd->add_option("--kind", f.kind, "logistic or svm")
      ->check(CLI::IsMember({"logistic", "svm"}));
  train_cmd->add_option("--seed", f.seed, "Seed");
  train_cmd->add_option("--vocab", f.vocab, "Vocabulary the dataset was built from");
  train_cmd->add_option("--learning-rate", f.hyper.learning_rate);
  train_cmd->add_option("--l2", f.hyper.l2);
  train_cmd->add_option("--epochs", f.hyper.epochs);
  train_cmd->add_option("--class-weight", f.hyper.class_weight, "Weight of suspicious examples");
  train_cmd->add_option("--threshold", f.hyper.threshold, "Logistic decision threshold");
  train_cmd->add_option("--out", f.out, "Model (JSON)")->required();

  auto *evaluate = app.add_subcommand("evaluate", "Cross-validate a model configuration");
  evaluate->add_option("--data", f.data, "Dataset (NDJSON)")->required();
  evaluate->add_option("--model", f.model, "Model (JSON)")->required();
  evaluate->add_option("--folds", f.folds, "Number of folds");
  evaluate->add_option("--out", f.out, "CV report (JSON)");

  auto *synth = app.add_subcommand("synth", "Generate a labeled synthetic corpus");
  synth->add_option("--n", f.n, "Number of sessions")->check(CLI::PositiveNumber);
  synth->add_option("--suspicious-fraction", f.suspicious_fraction)->check(CLI::Range(0.0, 1.0));
  synth->add_option("--seed", f.synth_seed, "Seed");
  synth->add_option("--overlap", f.overlap, "Feature overlap between classes")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--days", f.days, "Date span")->check(CLI::PositiveNumber);
  synth->add_option("--unknown-records", f.unknown_records, "Unidentified-location records");
  synth->add_option("--out", f.out, "Output directory")->required();

  auto *init = app.add_subcommand("init", "Create a service state directory");
  init->add_option("--state", f.state, "State directory")->envname("SENTINEL_STATE")->required();
  init->add_option("--sessions", f.sessions, "Sessions (NDJSON)")->required();
  init->add_option("--rules", f.rules, "Rule configuration (JSON)")->required();

  auto *serve = app.add_subcommand("serve", "Run the triage HTTP API");
  serve->add_option("--state", f.state, "State directory")->envname("SENTINEL_STATE")->required();
  serve->add_option("--port", f.port, "Port")->check(CLI::Range(1, 65535));
  serve->add_option("--host", f.host, "Bind address");
  serve->add_option("--rules", f.rules, "Rule file re-read by /api/rules/reload");
  serve->add_option("--static", f.static_dir, "Static assets served at /");

  std::vector<const char *> raw;
  for (const auto &a : argv)
    raw.push_back(a.c_str());
  if (raw.empty())
    raw.push_back("sentinel");

  try {
    app.parse(static_cast<int>(raw.size()), raw.data());
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    if (code == 0)
      return {kOk, {}};
    const auto chosen = app.get_subcommands();
    err << (chosen.empty() ? app.help() : chosen.front()->help());
    return {kUsageError, {}};
  }
  if (featurize->parsed() && f.labels.empty() && f.from_detection.empty()) {
    err << "featurize: one of --labels or --from-detection is required\n"
        << featurize->help();
    return {kUsageError, {}};
  }

  try {
    json summary;
    if (ingest->parsed())
      summary = cmd_ingest(f);
    else if (sessionize->parsed())
      summary = cmd_sessionize(f);
    else if (explore->parsed())
      summary = cmd_explore(f);
    else if (detect->parsed())
      summary = cmd_detect(f);
    else if (featurize->parsed())
      summary = cmd_featurize(f);
    else if (train_cmd->parsed())
      summary = cmd_train(f);
    else if (evaluate->parsed())
      summary = cmd_evaluate(f);
    else if (synth->parsed())
      summary = cmd_synth(f);
    else if (init->parsed())
      summary = cmd_init(f);
    else if (serve->parsed()) {
      cmd_serve(f, out);
      return {kOk, {}};
    }
    std::string text = summary.dump() + "\n";
    out << text;
    return {kOk, std::move(text)};
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    return {kRuntimeFailure, {}};
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return {kRuntimeFailure, {}};
  }
}

} // namespace sentinel::cli
