#include "matfdr/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "matfdr/csv.hpp"
#include "matfdr/rng.hpp"

namespace matfdr {

namespace {

int intern(const std::string& id, std::vector<std::string>& names,
           std::unordered_map<std::string, int>& index) {
  auto it = index.find(id);
  if (it != index.end()) return it->second;
  const int idx = static_cast<int>(names.size());
  names.push_back(id);
  index.emplace(id, idx);
  return idx;
}

double parse_rating(const std::string& text, const std::string& path,
                    std::size_t line_no) {
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != text.size() || !std::isfinite(value))
    throw std::runtime_error("read_ratings: bad rating at " + path + ":" +
                             std::to_string(line_no));
  return value;
}

void append_row(RatingsTable& table, RatingRow row) {
  intern(row.user, table.users, table.user_index);
  intern(row.item, table.items, table.item_index);
  table.rows.push_back(std::move(row));
}

RatingsTable read_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_ratings: cannot open " + path);
  RatingsTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() < 3 || fields.size() > 4)
      throw std::runtime_error("read_ratings: malformed line at " + path + ":" +
                               std::to_string(line_no));
    RatingRow row;
    row.user = fields[0];
    row.item = fields[1];
    row.rating = parse_rating(fields[2], path, line_no);
    if (fields.size() == 4) row.timestamp = fields[3];
    if (row.rating == 0.0) continue;  // zero means unrated
    append_row(table, std::move(row));
  }
  if (line_no == 0) throw std::runtime_error("read_ratings: empty file " + path);
  return table;
}

RatingsTable read_wide_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_ratings: cannot open " + path);
  RatingsTable table;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("read_ratings: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> labels;
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) labels.push_back(field);
    if (!line.empty() && line.back() == ',') labels.emplace_back();
  }
  if (labels.size() < 2)
    throw std::runtime_error("read_ratings: header needs item columns in " + path);

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != labels.size())
      throw std::runtime_error("read_ratings: malformed line at " + path + ":" +
                               std::to_string(line_no));
    for (std::size_t c = 1; c < fields.size(); ++c) {
      if (fields[c].empty()) continue;  // unobserved cell
      RatingRow row;
      row.user = fields[0];
      row.item = labels[c];
      row.rating = parse_rating(fields[c], path, line_no);
      if (row.rating == 0.0) continue;
      append_row(table, std::move(row));
    }
  }
  return table;
}

}  // namespace

ObservationSet RatingsTable::to_observations() const {
  ObservationSet obs{d1(), d2(), {}};
  obs.samples.reserve(rows.size());
  for (const RatingRow& row : rows)
    obs.samples.push_back(
        {user_index.at(row.user), item_index.at(row.item), row.rating});
  return obs;
}

RatingsTable read_ratings(const std::string& path, RatingsFormat format) {
  return format == RatingsFormat::tsv_user_item_rating ? read_tsv(path)
                                                       : read_wide_csv(path);
}

void write_ratings(const std::string& path, const RatingsTable& table,
                   RatingsFormat format) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_ratings: cannot write " + path);
  if (format == RatingsFormat::tsv_user_item_rating) {
    for (const RatingRow& row : table.rows) {
      out << row.user << '\t' << row.item << '\t' << csv::format(row.rating);
      if (!row.timestamp.empty()) out << '\t' << row.timestamp;
      out << '\n';
    }
  } else {
    out << "user";
    for (const std::string& item : table.items) out << ',' << item;
    out << '\n';
    std::unordered_map<long long, double> cell;
    for (const RatingRow& row : table.rows) {
      const long long key =
          static_cast<long long>(table.user_index.at(row.user)) *
              static_cast<long long>(table.d2()) +
          table.item_index.at(row.item);
      cell.emplace(key, row.rating);
    }
    for (int i = 0; i < table.d1(); ++i) {
      out << table.users[i];
      for (int j = 0; j < table.d2(); ++j) {
        out << ',';
        const auto it =
            cell.find(static_cast<long long>(i) * table.d2() + j);
        if (it != cell.end()) out << csv::format(it->second);
      }
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("write_ratings: write failed for " + path);
}

RatingsTable filter_min_ratings(const RatingsTable& table, int min_count) {
  if (min_count < 0)
    throw std::invalid_argument("filter_min_ratings: min_count must be >= 0");
  std::vector<int> counts(table.d1(), 0);
  for (const RatingRow& row : table.rows)
    counts[table.user_index.at(row.user)] += 1;

  RatingsTable out;
  out.items = table.items;
  out.item_index = table.item_index;
  for (const RatingRow& row : table.rows) {
    if (counts[table.user_index.at(row.user)] < min_count) continue;
    intern(row.user, out.users, out.user_index);
    out.rows.push_back(row);
  }
  return out;
}

HypothesisSet adjacent_pair_family(const RatingsTable& table, int max_q, Side side) {
  if (max_q < 0)
    throw std::invalid_argument("adjacent_pair_family: max_q must be >= 0");
  std::unordered_map<long long, double> cell;
  for (const RatingRow& row : table.rows) {
    const long long key = static_cast<long long>(table.user_index.at(row.user)) *
                              static_cast<long long>(table.d2()) +
                          table.item_index.at(row.item);
    cell.emplace(key, row.rating);  // first occurrence wins
  }
  HypothesisSet set;
  std::vector<bool> truth;
  for (int i = 0; i < table.d1() && set.q() < max_q; ++i) {
    for (int j = 0; j + 1 < table.d2() && set.q() < max_q; ++j) {
      const auto left = cell.find(static_cast<long long>(i) * table.d2() + j);
      const auto right = cell.find(static_cast<long long>(i) * table.d2() + j + 1);
      if (left == cell.end() || right == cell.end()) continue;
      set.forms.push_back(LinearForm::entry_difference(i, j, i, j + 1, 0.0, side));
      truth.push_back(left->second > right->second);
    }
  }
  set.truth = std::move(truth);
  return set;
}

std::pair<ObservationSet, ObservationSet> random_mask(const RatingsTable& table,
                                                      double keep_fraction,
                                                      std::uint64_t seed) {
  if (!(keep_fraction > 0.0 && keep_fraction < 1.0))
    throw std::invalid_argument("random_mask: keep_fraction must be in (0,1)");
  const ObservationSet all = table.to_observations();
  const int n = all.n();
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }
  const int kept_count = static_cast<int>(
      std::llround(keep_fraction * static_cast<double>(n)));
  ObservationSet kept{all.d1, all.d2, {}};
  ObservationSet heldout{all.d1, all.d2, {}};
  for (int i = 0; i < n; ++i)
    (i < kept_count ? kept : heldout).samples.push_back(all.samples[perm[i]]);
  return {std::move(kept), std::move(heldout)};
}

}  // namespace matfdr
