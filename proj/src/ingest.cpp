#include "sentinel/ingest.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <thread>

#include "sentinel/error.hpp"
#include "text_util.hpp"

namespace sentinel {

using nlohmann::json;

namespace {

constexpr std::size_t kChunkLines = 1 << 16;

bool is_scheme_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c == '+' || c == '-' || c == '.';
}

bool punctuation_only(std::string_view token) {
  for (char c : token) {
    const auto u = static_cast<unsigned char>(c);
    if (u >= 0x80 || !std::ispunct(u))
      return false;
  }
  return true;
}

std::string make_record_id(std::string_view source, std::size_t line_number) {
  std::string id(source);
  id += ':';
  id += std::to_string(line_number);
  return id;
}

Timestamp parse_timestamp(std::string_view date_text,
                          std::string_view time_text) {
  date_text = detail::trim(date_text);
  time_text = detail::trim(time_text);
  if (date_text.empty())
    throw Error(ErrorCode::missing_field, "date");
  auto date = Date::parse(date_text);
  if (!date)
    throw Error(ErrorCode::invalid_timestamp, "date");
  if (time_text.empty())
    throw Error(ErrorCode::missing_field, "time");
  auto minute = Timestamp::parse_time(time_text);
  if (!minute)
    throw Error(ErrorCode::invalid_timestamp, "time");
  return Timestamp{*date, *minute};
}

std::string required_text(std::string_view value, const char *field) {
  auto trimmed = detail::trim(value);
  if (trimmed.empty())
    throw Error(ErrorCode::missing_field, field);
  return std::string(trimmed);
}

std::optional<std::int64_t> parse_duration_text(std::string_view text) {
  text = detail::trim(text);
  if (text.empty())
    return std::nullopt;
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw Error(ErrorCode::invalid_field, "duration_seconds");
  if (value < 0)
    throw Error(ErrorCode::negative_duration, "duration_seconds");
  return value;
}

TrafficRecord parse_csv(std::string_view line, std::string_view source,
                        std::size_t line_number) {
  static constexpr const char *kColumns[] = {
      "date", "time", "country", "city", "url", "keywords", "duration_seconds"};
  if (!detail::valid_utf8(line))
    throw Error(ErrorCode::malformed_line, "invalid UTF-8");
  auto fields = split_csv_line(line);
  if (fields.size() < 7)
    throw Error(ErrorCode::missing_field, kColumns[fields.size()]);
  if (fields.size() > 7)
    throw Error(ErrorCode::malformed_line,
                "expected 7 fields, got " + std::to_string(fields.size()));

  TrafficRecord r;
  r.record_id = make_record_id(source, line_number);
  r.timestamp = parse_timestamp(fields[0], fields[1]);
  r.country = required_text(fields[2], "country");
  r.city = required_text(fields[3], "city");
  r.raw_url = required_text(fields[4], "url");
  r.url_tokens = normalize_url(r.raw_url);
  r.keywords = parse_keywords(fields[5]);
  r.duration_seconds = parse_duration_text(fields[6]);
  return r;
}

std::string_view json_text(const json &obj, const char *field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null())
    throw Error(ErrorCode::missing_field, field);
  if (!it->is_string())
    throw Error(ErrorCode::invalid_field, field);
  return it->get_ref<const std::string &>();
}

std::optional<std::int64_t> json_duration(const json &obj) {
  auto it = obj.find("duration_seconds");
  if (it == obj.end() || it->is_null())
    return std::nullopt;
  if (it->is_number_unsigned())
    return static_cast<std::int64_t>(it->get<std::uint64_t>());
  if (it->is_number_integer()) {
    auto v = it->get<std::int64_t>();
    if (v < 0)
      throw Error(ErrorCode::negative_duration, "duration_seconds");
    return v;
  }
  if (it->is_number_float()) {
    double v = it->get<double>();
    if (v < 0)
      throw Error(ErrorCode::negative_duration, "duration_seconds");
    if (v != static_cast<double>(static_cast<std::int64_t>(v)))
      throw Error(ErrorCode::invalid_field, "duration_seconds");
    return static_cast<std::int64_t>(v);
  }
  throw Error(ErrorCode::invalid_field, "duration_seconds");
}

std::vector<std::string> json_keywords(const json &obj) {
  auto it = obj.find("keywords");
  if (it == obj.end() || it->is_null())
    return {};
  if (it->is_string())
    return parse_keywords(it->get_ref<const std::string &>());
  if (it->is_array()) {
    std::vector<std::string> out;
    for (const auto &item : *it) {
      if (!item.is_string())
        throw Error(ErrorCode::invalid_field, "keywords");
      auto tokens = parse_keywords(item.get_ref<const std::string &>());
      out.insert(out.end(), tokens.begin(), tokens.end());
    }
    return out;
  }
  throw Error(ErrorCode::invalid_field, "keywords");
}

struct ChunkResult {
  std::vector<TrafficRecord> records;
  IngestReport report;
};

void parse_into(std::string_view line, std::size_t line_number,
                InputFormat format, std::string_view source, ChunkResult &out) {
  ++out.report.total_lines;
  try {
    out.records.push_back(parse_record(line, format, source, line_number));
    ++out.report.parsed;
  } catch (const Error &e) {
    ++out.report.rejected;
    ++out.report.reject_reasons[std::string(to_string(e.code()))];
  }
}

struct PendingLine {
  std::size_t number;
  std::string text;
};

void parse_chunk(std::vector<PendingLine> &chunk, InputFormat format,
                 std::string_view source, unsigned threads, Corpus &corpus) {
  const std::size_t parts = std::min<std::size_t>(threads, chunk.size());
  std::vector<ChunkResult> results(parts);
  std::vector<std::thread> workers;
  const std::size_t per = (chunk.size() + parts - 1) / parts;
  for (std::size_t p = 0; p < parts; ++p) {
    workers.emplace_back([&, p] {
      const std::size_t begin = p * per;
      const std::size_t end = std::min(chunk.size(), begin + per);
      for (std::size_t i = begin; i < end; ++i)
        parse_into(chunk[i].text, chunk[i].number, format, source, results[p]);
    });
  }
  for (auto &w : workers)
    w.join();
  for (auto &r : results) {
    corpus.records.insert(corpus.records.end(),
                          std::make_move_iterator(r.records.begin()),
                          std::make_move_iterator(r.records.end()));
    corpus.report.merge(r.report);
  }
  chunk.clear();
}

bool blank(std::string_view s) { return detail::trim(s).empty(); }

} // namespace

std::string_view to_string(InputFormat format) {
  return format == InputFormat::csv ? "csv" : "ndjson";
}

std::optional<InputFormat> parse_input_format(std::string_view text) {
  if (text == "csv")
    return InputFormat::csv;
  if (text == "ndjson")
    return InputFormat::ndjson;
  return std::nullopt;
}

void IngestReport::merge(const IngestReport &other) {
  total_lines += other.total_lines;
  parsed += other.parsed;
  rejected += other.rejected;
  for (const auto &[reason, count] : other.reject_reasons)
    reject_reasons[reason] += count;
}

std::vector<std::string> normalize_url(std::string_view raw_url) {
  std::string_view s = detail::trim(raw_url);
  if (auto hash = s.find('#'); hash != std::string_view::npos)
    s = s.substr(0, hash);
  if (auto q = s.find('?'); q != std::string_view::npos)
    s = s.substr(0, q);

  bool has_authority = false;
  if (auto sep = s.find("://"); sep != std::string_view::npos && sep > 0) {
    bool scheme_ok = true;
    for (char c : s.substr(0, sep))
      scheme_ok = scheme_ok && is_scheme_char(c);
    if (scheme_ok) {
      s = s.substr(sep + 3);
      has_authority = true;
    }
  } else if (s.starts_with("//")) {
    s = s.substr(2);
    has_authority = true;
  }
  if (has_authority) {
    auto slash = s.find('/');
    s = slash == std::string_view::npos ? std::string_view{} : s.substr(slash);
  }

  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find('/', start);
    if (end == std::string_view::npos)
      end = s.size();
    auto seg = detail::trim(s.substr(start, end - start));
    if (!seg.empty())
      tokens.push_back(detail::to_lower(seg));
    start = end + 1;
  }
  return tokens;
}

std::vector<std::string> parse_keywords(std::string_view raw) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < raw.size()) {
    while (i < raw.size() && detail::is_space(raw[i]))
      ++i;
    std::size_t j = i;
    while (j < raw.size() && !detail::is_space(raw[j]))
      ++j;
    if (j > i) {
      auto token = raw.substr(i, j - i);
      if (!punctuation_only(token))
        tokens.push_back(detail::to_lower(token));
    }
    i = j;
  }
  return tokens;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (quoted)
    throw Error(ErrorCode::malformed_line, "unterminated quote");
  fields.push_back(std::move(current));
  return fields;
}

TrafficRecord record_from_json(const json &obj, std::string_view source_name,
                               std::size_t line_number) {
  if (!obj.is_object())
    throw Error(ErrorCode::malformed_line, "expected a JSON object");
  TrafficRecord r;
  auto id = obj.find("record_id");
  if (id != obj.end() && id->is_string() && !id->get_ref<const std::string &>().empty())
    r.record_id = id->get<std::string>();
  else
    r.record_id = make_record_id(source_name, line_number);
  r.timestamp = parse_timestamp(json_text(obj, "date"), json_text(obj, "time"));
  r.country = required_text(json_text(obj, "country"), "country");
  r.city = required_text(json_text(obj, "city"), "city");
  r.raw_url = required_text(json_text(obj, "url"), "url");
  r.url_tokens = normalize_url(r.raw_url);
  r.keywords = json_keywords(obj);
  r.duration_seconds = json_duration(obj);
  return r;
}

TrafficRecord parse_record(std::string_view line, InputFormat format,
                           std::string_view source_name,
                           std::size_t line_number) {
  if (format == InputFormat::csv)
    return parse_csv(line, source_name, line_number);
  json obj = json::parse(line, nullptr, false);
  if (obj.is_discarded())
    throw Error(ErrorCode::malformed_line, "invalid JSON");
  return record_from_json(obj, source_name, line_number);
}

Corpus load_corpus(std::istream &in, InputFormat format,
                   std::string_view source_name, unsigned threads) {
  Corpus corpus;
  ChunkResult serial;
  std::vector<PendingLine> chunk;
  bool need_header = format == InputFormat::csv;
  std::string line;
  std::size_t line_number = 0;

  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (blank(line))
      continue;
    if (need_header) {
      std::string_view header = detail::trim(line);
      if (header.starts_with("\xEF\xBB\xBF"))
        header.remove_prefix(3);
      if (header != kCsvHeader)
        throw Error(ErrorCode::invalid_header, std::string(header));
      need_header = false;
      continue;
    }
    if (threads <= 1) {
      parse_into(line, line_number, format, source_name, serial);
    } else {
      chunk.push_back({line_number, std::move(line)});
      if (chunk.size() >= kChunkLines)
        parse_chunk(chunk, format, source_name, threads, corpus);
    }
  }
  if (in.bad())
    throw Error(ErrorCode::io_failure, std::string(source_name));
  if (!chunk.empty())
    parse_chunk(chunk, format, source_name, threads, corpus);
  if (threads <= 1) {
    corpus.records = std::move(serial.records);
    corpus.report = std::move(serial.report);
  }
  return corpus;
}

Corpus load_corpus_file(const std::filesystem::path &path, InputFormat format,
                        unsigned threads) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::io_failure, "cannot open " + path.string());
  return load_corpus(in, format, path.filename().string(), threads);
}

json record_to_json(const TrafficRecord &record) {
  json obj = {
      {"record_id", record.record_id},
      {"date", record.timestamp.date.iso()},
      {"time", record.timestamp.time_text()},
      {"country", record.country},
      {"city", record.city},
      {"url", record.raw_url},
      {"keywords", detail::join(record.keywords, " ")},
  };
  if (record.duration_seconds)
    obj["duration_seconds"] = *record.duration_seconds;
  return obj;
}

void write_records(std::ostream &out, std::span<const TrafficRecord> records) {
  for (const auto &r : records)
    out << record_to_json(r).dump() << '\n';
}

} // namespace sentinel
