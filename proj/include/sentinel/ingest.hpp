#ifndef SENTINEL_INGEST_HPP
#define SENTINEL_INGEST_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sentinel/civil_time.hpp"

namespace sentinel {

enum class InputFormat { csv, ndjson };

std::string_view to_string(InputFormat format);
std::optional<InputFormat> parse_input_format(std::string_view text);

/// One visit to one webpage.
///
/// Invariants (established by parse_record): country and city are non-empty
/// and trimmed; url_tokens holds only lowercase, non-empty path segments;
/// keywords are lowercase, trimmed and non-empty; duration is never negative.
struct TrafficRecord {
  std::string record_id;
  Timestamp timestamp;
  std::string country;
  std::string city;
  std::string raw_url;
  std::vector<std::string> url_tokens;
  std::vector<std::string> keywords;
  std::optional<std::int64_t> duration_seconds;

  bool operator==(const TrafficRecord &) const = default;
};

struct IngestReport {
  std::size_t total_lines = 0;
  std::size_t parsed = 0;
  std::size_t rejected = 0;
  std::map<std::string, std::size_t> reject_reasons;

  void merge(const IngestReport &other);
  bool operator==(const IngestReport &) const = default;
};

inline constexpr std::string_view kCsvHeader =
    "date,time,country,city,url,keywords,duration_seconds";

/// Strips scheme, authority (www., domain, port), query and fragment, then
/// splits the path on '/' into lowercase non-empty tokens. Text without a
/// scheme or leading "//" is treated as a bare path.
std::vector<std::string> normalize_url(std::string_view raw_url);

/// Lowercases, splits on whitespace, drops tokens made only of punctuation.
std::vector<std::string> parse_keywords(std::string_view raw);

/// Parses one data line. `source_name` and `line_number` build the
/// `<source>:<line>` record id used when the line carries none.
/// Throws Error with invalid_timestamp, missing_field, negative_duration,
/// invalid_field or malformed_line; detail names the field.
TrafficRecord parse_record(std::string_view line, InputFormat format,
                           std::string_view source_name = "input",
                           std::size_t line_number = 0);

/// Splits one CSV line honouring double-quoted fields.
std::vector<std::string> split_csv_line(std::string_view line);

struct Corpus {
  std::vector<TrafficRecord> records;
  IngestReport report;
};

/// Reads every line; malformed lines are counted in the report and skipped.
/// CSV input must start with kCsvHeader. Blank lines are ignored. With
/// threads > 1 the stream is parsed in chunks whose partitions run
/// concurrently; output order and report are identical to the serial path.
Corpus load_corpus(std::istream &in, InputFormat format,
                   std::string_view source_name, unsigned threads = 1);

Corpus load_corpus_file(const std::filesystem::path &path, InputFormat format,
                        unsigned threads = 1);

/// Canonical NDJSON object for a normalized record. Keywords are written as
/// the space-joined token list so that re-parsing is lossless.
nlohmann::json record_to_json(const TrafficRecord &record);
TrafficRecord record_from_json(const nlohmann::json &obj,
                               std::string_view source_name = "input",
                               std::size_t line_number = 0);

void write_records(std::ostream &out, std::span<const TrafficRecord> records);

} // namespace sentinel

#endif // SENTINEL_INGEST_HPP
