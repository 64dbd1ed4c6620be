#pragma once

#include <filesystem>
#include <istream>
#include <vector>

#include "ersft/bandit.hpp"
#include "ersft/metrics.hpp"

namespace ersft {

struct MovieLensOptions {
  int min_history = 1;
  int max_users = 0;  // 0 keeps every user
  double rating_threshold = 4.5;
};

struct IngestSummary {
  long rows = 0;
  int users_seen = 0;
  int users_dropped_min_history = 0;
  int users_kept = 0;
  int test_cases = 0;
  int test_cases_below_threshold = 0;
  int n_items = 0;
};

struct IngestResult {
  OfflineDataset train;
  std::vector<TestCase> test;
  IngestSummary summary;
  std::vector<long long> user_ids;  // dense context id -> raw user id
  std::vector<long long> item_ids;  // dense action id -> raw item id
};

/// Parses user, item, rating, timestamp rows ("::" or "," delimited, detected
/// from the first line; a non-numeric first line is a header). Each user's
/// interactions are ordered by (timestamp, row order); the last one is held
/// out and kept as a test case iff its rating reaches the threshold.
IngestResult ingest_movielens(std::istream& in, const MovieLensOptions& options);
IngestResult ingest_movielens(const std::filesystem::path& path, const MovieLensOptions& options);

}  // namespace ersft
