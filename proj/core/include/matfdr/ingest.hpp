#pragma once

#include <string>
#include <unordered_map>

#include "matfdr/multitest.hpp"

namespace matfdr {

struct RatingRow {
  std::string user;
  std::string item;
  double rating = 0.0;
  std::string timestamp;  // raw text, preserved for round-trips; may be empty
};

// Observed (nonzero) ratings with user/item ids mapped to dense contiguous
// indices in order of first appearance.
struct RatingsTable {
  std::vector<RatingRow> rows;
  std::vector<std::string> users;  // index -> id
  std::vector<std::string> items;
  std::unordered_map<std::string, int> user_index;
  std::unordered_map<std::string, int> item_index;

  int d1() const { return static_cast<int>(users.size()); }
  int d2() const { return static_cast<int>(items.size()); }
  bool empty() const { return rows.empty(); }

  ObservationSet to_observations() const;
};

enum class RatingsFormat { tsv_user_item_rating, csv_wide_matrix };

/// tsv: tab-separated "user item rating [timestamp]" lines. csv_wide: header
/// row of item labels, one row per user, empty or zero cells unobserved.
/// A rating of zero means "unrated" and is excluded in both formats.
RatingsTable read_ratings(const std::string& path, RatingsFormat format);

void write_ratings(const std::string& path, const RatingsTable& table,
                   RatingsFormat format);

/// Drops users with fewer than min_count ratings and re-indexes users densely
/// (items keep their indices). The result may be empty.
RatingsTable filter_min_ratings(const RatingsTable& table, int min_count);

/// Scans row-major for observed pairs (i,j),(i,j+1) and builds forms
/// e_i e_j^T - e_i e_{j+1}^T with theta = 0, up to max_q of them. The truth
/// labels are the observed-order proxy Y(i,j) > Y(i,j+1).
HypothesisSet adjacent_pair_family(const RatingsTable& table, int max_q, Side side);

/// Uniform without-replacement split of the observed cells.
std::pair<ObservationSet, ObservationSet> random_mask(const RatingsTable& table,
                                                      double keep_fraction,
                                                      std::uint64_t seed);

}  // namespace matfdr
