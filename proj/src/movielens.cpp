#include "ersft/movielens.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <string>
#include <string_view>

#include "ersft/error.hpp"

namespace ersft {

namespace {

struct Row {
  long long user;
  long long item;
  double rating;
  long long timestamp;
  long order;
};

std::vector<std::string_view> split(std::string_view line, std::string_view delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + delim.size();
  }
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_row(std::string_view line, std::string_view delim, Row& row) {
  const auto f = split(line, delim);
  if (f.size() != 4) return false;
  return parse_number(f[0], row.user) && parse_number(f[1], row.item) &&
         parse_number(f[2], row.rating) && parse_number(f[3], row.timestamp);
}

}  // namespace

IngestResult ingest_movielens(std::istream& in, const MovieLensOptions& options) {
  if (options.min_history < 1) throw ParameterError("min_history must be >= 1");
  if (options.max_users < 0) throw ParameterError("max_users must be >= 0");

  std::map<long long, std::vector<Row>> by_user;
  std::string delim;
  std::string line;
  long line_no = 0;
  long rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (delim.empty()) {
      delim = line.find("::") != std::string::npos ? "::" : ",";
      Row probe{};
      if (delim == "," && !parse_row(line, delim, probe)) {
        long long first = 0;
        if (!parse_number(split(line, delim)[0], first)) continue;  // header
      }
    }
    Row row{};
    if (!parse_row(line, delim, row)) throw DataError("unparseable ratings row: " + line, line_no);
    row.order = rows++;
    by_user[row.user].push_back(row);
  }

  IngestResult result;
  result.summary.rows = rows;
  result.summary.users_seen = static_cast<int>(by_user.size());

  std::vector<std::vector<Row>*> kept;
  for (auto& [user, user_rows] : by_user) {
    if (static_cast<int>(user_rows.size()) < options.min_history) {
      ++result.summary.users_dropped_min_history;
      continue;
    }
    if (options.max_users > 0 && static_cast<int>(kept.size()) >= options.max_users) break;
    std::stable_sort(user_rows.begin(), user_rows.end(),
                     [](const Row& a, const Row& b) { return a.timestamp < b.timestamp; });
    kept.push_back(&user_rows);
    result.user_ids.push_back(user);
  }
  result.summary.users_kept = static_cast<int>(kept.size());

  std::map<long long, int> item_index;
  for (const auto* user_rows : kept) {
    for (const auto& r : *user_rows) item_index.emplace(r.item, 0);
  }
  for (auto& [raw, idx] : item_index) {
    idx = static_cast<int>(result.item_ids.size());
    result.item_ids.push_back(raw);
  }
  result.summary.n_items = static_cast<int>(result.item_ids.size());

  auto& ds = result.train;
  ds.catalog = {std::max(1, static_cast<int>(kept.size())), static_cast<int>(item_index.size())};
  ds.sequences.resize(kept.size());
  for (std::size_t u = 0; u < kept.size(); ++u) {
    const auto& user_rows = *kept[u];
    const int ctx = static_cast<int>(u);
    auto& seq = ds.sequences[u];
    for (std::size_t k = 0; k + 1 < user_rows.size(); ++k) {
      const int item = item_index.at(user_rows[k].item);
      ds.interactions.push_back({ctx, item, user_rows[k].rating, static_cast<int>(k)});
      seq.push_back(item);
    }
    const auto& last = user_rows.back();
    if (last.rating >= options.rating_threshold) {
      result.test.push_back({ctx, seq, item_index.at(last.item), last.rating});
    } else {
      ++result.summary.test_cases_below_threshold;
    }
  }
  result.summary.test_cases = static_cast<int>(result.test.size());
  ds.refresh_context_dist();
  return result;
}

IngestResult ingest_movielens(const std::filesystem::path& path, const MovieLensOptions& options) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ratings file " + path.string());
  return ingest_movielens(in, options);
}

}  // namespace ersft
