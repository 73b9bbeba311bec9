#ifndef SENTINEL_FEATURES_HPP
#define SENTINEL_FEATURES_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sentinel/sessionize.hpp"

namespace sentinel {

enum class Label : int { benign = 0, suspicious = 1 };

std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view text);

/// How vectorize fills feature values. presence: every active feature is 1.
/// counts: url: and kw: features carry their occurrence count in the session;
/// location features stay 1.
enum class FeatureWeighting { presence, counts };

std::string_view to_string(FeatureWeighting weighting);
std::optional<FeatureWeighting> parse_feature_weighting(std::string_view text);

/// Namespaced token -> dense index. Indices follow lexicographic token order,
/// so the mapping is a pure function of the token set.
struct Vocabulary {
  std::map<std::string, std::uint32_t> token_to_index;
  std::size_t min_df = 1;
  FeatureWeighting weighting = FeatureWeighting::presence;

  std::size_t dimension() const { return token_to_index.size(); }
  std::optional<std::uint32_t> index_of(std::string_view token) const;
  /// Tokens in index order.
  std::vector<std::string> tokens() const;
  /// Hex SHA-256 over the tokens in index order (and the weighting when it is
  /// not presence); binds models to vocabularies.
  std::string digest() const;

  bool operator==(const Vocabulary &) const = default;
};

/// The four feature families: country:, city:, url:, kw:.
std::set<std::string> session_tokens(const UserSession &session);

/// Throws Error(empty_corpus) for no sessions and Error(empty_vocabulary)
/// when min_df filters every token out.
Vocabulary build_vocabulary(std::span<const UserSession> sessions,
                            std::size_t min_df = 1,
                            FeatureWeighting weighting = FeatureWeighting::presence);

/// Sparse vector over a vocabulary.
struct FeatureVector {
  std::size_t dimension = 0;
  std::vector<std::uint32_t> active; // strictly increasing, < dimension
  std::vector<double> values;        // parallel to active; empty means all 1

  double value(std::size_t k) const { return values.empty() ? 1.0 : values[k]; }
  bool operator==(const FeatureVector &) const = default;
};

/// Weighted by vocab.weighting. Tokens missing from the vocabulary are ignored.
FeatureVector vectorize(const UserSession &session, const Vocabulary &vocab);

struct LabeledDataset {
  std::size_t dimension = 0;
  std::vector<FeatureVector> vectors;
  std::vector<Label> labels;
  std::vector<std::string> session_ids;

  std::size_t size() const { return labels.size(); }
  std::size_t count(Label label) const;
  /// Rows at `indices`, in that order.
  LabeledDataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const LabeledDataset &) const = default;
};

/// Labeled sessions only, ordered by session_id. Throws
/// Error(unknown_session_id) when a label names a session that is absent.
LabeledDataset assemble_dataset(std::span<const UserSession> sessions,
                                const std::map<std::string, Label> &labels,
                                const Vocabulary &vocab);

nlohmann::json vocabulary_to_json(const Vocabulary &vocab);
/// Validates gap-free lexicographic indices; throws Error(invalid_format).
Vocabulary vocabulary_from_json(const nlohmann::json &doc);

/// NDJSON rows {session_id, label, active_indices, dimension} plus `values`
/// for weighted vectors.
void write_dataset(std::ostream &out, const LabeledDataset &dataset);
LabeledDataset read_dataset(std::istream &in);

} // namespace sentinel

#endif // SENTINEL_FEATURES_HPP
