#ifndef SENTINEL_EXPLORE_HPP
#define SENTINEL_EXPLORE_HPP

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sentinel/ingest.hpp"

namespace sentinel {

enum class VolumeLevel {
  daily,
  weekly,
  monthly,
  yearly,
  minute,
  hourly,
  city,
  country,
  region,
  webpage,
  directory,
  keywords,
  keyword_category,
};

std::string_view to_string(VolumeLevel level);
std::optional<VolumeLevel> parse_volume_level(std::string_view text);
bool is_time_level(VolumeLevel level);
const std::vector<VolumeLevel> &all_volume_levels();

struct VolumeRow {
  std::string bucket;
  std::size_t count = 0;

  bool operator==(const VolumeRow &) const = default;
};

struct VolumeTable {
  VolumeLevel level = VolumeLevel::daily;
  std::vector<VolumeRow> rows; // ascending bucket label

  std::size_t total() const;
  bool operator==(const VolumeTable &) const = default;
};

using RegionMap = std::map<std::string, std::string, std::less<>>;
using CategoryDictionary = std::map<std::string, std::set<std::string>>;

/// Country -> UN macro-region (Africa, Americas, Asia, Europe, Oceania).
const RegionMap &default_region_map();

struct ExploreOptions {
  RegionMap regions = default_region_map();
  CategoryDictionary keyword_categories;
};

inline constexpr std::string_view kUnassignedRegion = "Unassigned";
inline constexpr std::string_view kUncategorized = "uncategorized";

/// Bucket labels:
///   daily YYYY-MM-DD, weekly = Monday's date, monthly YYYY-MM, yearly YYYY,
///   minute "YYYY-MM-DD HH:MM", hourly "YYYY-MM-DD HH:00",
///   city "Country/City", webpage "/a/b", directory = first url token ("/" for
///   the root), keywords = space-joined tokens, keyword_category = first
///   category (by name) holding any of the record's keywords.
/// Records without keywords do not contribute to the two keyword levels.
VolumeTable aggregate_volume(std::span<const TrafficRecord> records,
                             VolumeLevel level,
                             const ExploreOptions &options = {});

/// Throws Error(unknown_level) for an unrecognized level name.
VolumeTable aggregate_volume(std::span<const TrafficRecord> records,
                             std::string_view level,
                             const ExploreOptions &options = {});

/// Inserts zero-count buckets between the first and last bucket of a
/// daily, weekly, monthly or yearly table. Other levels are returned as is.
VolumeTable fill_time_gaps(const VolumeTable &table);

double foreign_share(std::span<const TrafficRecord> records,
                     std::string_view home_country);

std::vector<std::pair<std::string, std::size_t>>
top_locations(std::span<const TrafficRecord> records, std::size_t k,
              std::optional<std::string> exclude = std::nullopt);

struct AnomalyFlag {
  std::string bucket_label;
  std::size_t observed = 0;
  double expected = 0.0;
  double score = 0.0; // +inf when the trailing window had zero variance

  bool operator==(const AnomalyFlag &) const = default;
};

/// Trailing-window z-score over the table rows in order.
/// Throws Error(window_too_small) for window < 2 and Error(not_time_level)
/// for non-time tables.
std::vector<AnomalyFlag> detect_volume_anomalies(const VolumeTable &table,
                                                 std::size_t window = 28,
                                                 double z_threshold = 3.0);

void write_volume_csv(std::ostream &out, const VolumeTable &table);
void write_anomalies_csv(std::ostream &out, std::span<const AnomalyFlag> flags);

} // namespace sentinel

#endif // SENTINEL_EXPLORE_HPP
