#include "sentinel/features.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <utility>

#include "sentinel/digest.hpp"
#include "sentinel/error.hpp"
#include "text_util.hpp"

namespace sentinel {

using nlohmann::json;

std::string_view to_string(Label label) {
  return label == Label::suspicious ? "suspicious" : "benign";
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "benign")
    return Label::benign;
  if (text == "suspicious")
    return Label::suspicious;
  return std::nullopt;
}

std::optional<std::uint32_t> Vocabulary::index_of(std::string_view token) const {
  auto it = token_to_index.find(std::string(token));
  if (it == token_to_index.end())
    return std::nullopt;
  return it->second;
}

std::vector<std::string> Vocabulary::tokens() const {
  std::vector<std::string> out(token_to_index.size());
  for (const auto &[token, index] : token_to_index)
    out[index] = token;
  return out;
}

std::string Vocabulary::digest() const {
  std::string material;
  for (const auto &t : tokens()) {
    material += t;
    material += '\n';
  }
  if (weighting != FeatureWeighting::presence) {
    material += '#';
    material += to_string(weighting);
  }
  return sha256_hex(material);
}

std::string_view to_string(FeatureWeighting weighting) {
  return weighting == FeatureWeighting::counts ? "counts" : "presence";
}

std::optional<FeatureWeighting> parse_feature_weighting(std::string_view text) {
  if (text == "presence")
    return FeatureWeighting::presence;
  if (text == "counts")
    return FeatureWeighting::counts;
  return std::nullopt;
}

std::set<std::string> session_tokens(const UserSession &session) {
  std::set<std::string> tokens;
  tokens.insert("country:" + detail::to_lower(session.key.country));
  tokens.insert("city:" + detail::to_lower(session.key.city));
  for (const auto &[t, _] : session.page_tokens)
    tokens.insert("url:" + t);
  for (const auto &[t, _] : session.keyword_tokens)
    tokens.insert("kw:" + t);
  return tokens;
}

Vocabulary build_vocabulary(std::span<const UserSession> sessions,
                            std::size_t min_df, FeatureWeighting weighting) {
  if (sessions.empty())
    throw Error(ErrorCode::empty_corpus, "no sessions");
  std::map<std::string, std::size_t> df;
  for (const auto &s : sessions)
    for (auto &t : session_tokens(s))
      ++df[t];
  Vocabulary vocab;
  vocab.min_df = min_df;
  vocab.weighting = weighting;
  std::uint32_t next = 0;
  for (const auto &[token, count] : df)
    if (count >= min_df)
      vocab.token_to_index.emplace(token, next++);
  if (vocab.token_to_index.empty())
    throw Error(ErrorCode::empty_vocabulary,
                "no token reaches min_df " + std::to_string(min_df));
  return vocab;
}

FeatureVector vectorize(const UserSession &session, const Vocabulary &vocab) {
  std::vector<std::pair<std::uint32_t, double>> entries;
  auto add = [&](const std::string &token, double value) {
    if (auto idx = vocab.index_of(token))
      entries.emplace_back(*idx, value);
  };
  add("country:" + detail::to_lower(session.key.country), 1.0);
  add("city:" + detail::to_lower(session.key.city), 1.0);
  const bool counts = vocab.weighting == FeatureWeighting::counts;
  for (const auto &[t, n] : session.page_tokens)
    add("url:" + t, counts ? static_cast<double>(n) : 1.0);
  for (const auto &[t, n] : session.keyword_tokens)
    add("kw:" + t, counts ? static_cast<double>(n) : 1.0);
  std::sort(entries.begin(), entries.end());

  FeatureVector v;
  v.dimension = vocab.dimension();
  for (const auto &[idx, value] : entries) {
    v.active.push_back(idx);
    if (counts)
      v.values.push_back(value);
  }
  return v;
}

std::size_t LabeledDataset::count(Label label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out;
  out.dimension = dimension;
  out.vectors.reserve(indices.size());
  out.labels.reserve(indices.size());
  out.session_ids.reserve(indices.size());
  for (auto i : indices) {
    out.vectors.push_back(vectors.at(i));
    out.labels.push_back(labels.at(i));
    out.session_ids.push_back(session_ids.at(i));
  }
  return out;
}

LabeledDataset assemble_dataset(std::span<const UserSession> sessions,
                                const std::map<std::string, Label> &labels,
                                const Vocabulary &vocab) {
  std::map<std::string_view, const UserSession *> by_id;
  for (const auto &s : sessions)
    by_id.emplace(s.session_id, &s);
  LabeledDataset ds;
  ds.dimension = vocab.dimension();
  for (const auto &[id, label] : labels) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw Error(ErrorCode::unknown_session_id, id);
    ds.vectors.push_back(vectorize(*it->second, vocab));
    ds.labels.push_back(label);
    ds.session_ids.push_back(id);
  }
  return ds;
}

json vocabulary_to_json(const Vocabulary &vocab) {
  json tokens = json::object();
  for (const auto &[t, i] : vocab.token_to_index)
    tokens[t] = i;
  return json{{"min_df", vocab.min_df},
              {"weighting", to_string(vocab.weighting)},
              {"tokens", std::move(tokens)}};
}

Vocabulary vocabulary_from_json(const json &doc) {
  try {
    Vocabulary vocab;
    vocab.min_df = doc.at("min_df").get<std::size_t>();
    if (doc.contains("weighting")) {
      auto weighting = parse_feature_weighting(doc.at("weighting").get<std::string>());
      if (!weighting)
        throw Error(ErrorCode::invalid_format, "weighting");
      vocab.weighting = *weighting;
    }
    std::uint32_t expected = 0;
    // json objects iterate in key order, which must equal index order.
    for (const auto &[token, index] : doc.at("tokens").items()) {
      if (index.get<std::uint32_t>() != expected)
        throw Error(ErrorCode::invalid_format,
                    "vocabulary index out of order at " + token);
      vocab.token_to_index.emplace(token, expected++);
    }
    return vocab;
  } catch (const json::exception &e) {
    throw Error(ErrorCode::invalid_format, e.what());
  }
}

void write_dataset(std::ostream &out, const LabeledDataset &dataset) {
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    json row = {{"session_id", dataset.session_ids[i]},
                {"label", static_cast<int>(dataset.labels[i])},
                {"active_indices", dataset.vectors[i].active},
                {"dimension", dataset.dimension}};
    if (!dataset.vectors[i].values.empty())
      row["values"] = dataset.vectors[i].values;
    out << row.dump() << '\n';
  }
}

LabeledDataset read_dataset(std::istream &in) {
  LabeledDataset ds;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty())
      continue;
    json row = json::parse(line, nullptr, false);
    if (row.is_discarded())
      throw Error(ErrorCode::invalid_format, "dataset row is not JSON");
    try {
      const auto dim = row.at("dimension").get<std::size_t>();
      if (first)
        ds.dimension = dim;
      else if (dim != ds.dimension)
        throw Error(ErrorCode::dimension_mismatch, row.at("session_id").get<std::string>());
      first = false;
      const int label = row.at("label").get<int>();
      if (label != 0 && label != 1)
        throw Error(ErrorCode::invalid_format, "label must be 0 or 1");
      FeatureVector v{dim, row.at("active_indices").get<std::vector<std::uint32_t>>(), {}};
      for (std::size_t i = 0; i < v.active.size(); ++i)
        if (v.active[i] >= dim || (i > 0 && v.active[i] <= v.active[i - 1]))
          throw Error(ErrorCode::invalid_format, "active indices must increase below dimension");
      if (row.contains("values")) {
        v.values = row.at("values").get<std::vector<double>>();
        if (v.values.size() != v.active.size())
          throw Error(ErrorCode::invalid_format, "values length differs from active_indices");
        for (double x : v.values)
          if (!std::isfinite(x))
            throw Error(ErrorCode::invalid_format, "non-finite feature value");
      }
      ds.session_ids.push_back(row.at("session_id").get<std::string>());
      ds.labels.push_back(static_cast<Label>(label));
      ds.vectors.push_back(std::move(v));
    } catch (const json::exception &e) {
      throw Error(ErrorCode::invalid_format, e.what());
    }
  }
  return ds;
}

} // namespace sentinel
