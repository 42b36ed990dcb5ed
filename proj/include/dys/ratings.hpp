#pragma once

#include "dys/datagen.hpp"
#include "dys/linalg.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dys {

/// Parsed "UserID::MovieID::Rating::Timestamp" records after id remapping.
///
/// Users and items are renumbered 0, 1, ... in ascending order of their
/// original ids. A repeated (user, item) pair keeps the last record seen.
struct RatingsDataset {
  std::vector<Index> users;
  std::vector<Index> items;
  std::vector<double> ratings;
  std::vector<std::int64_t> timestamps;
  std::vector<std::int64_t> user_ids; // original id of each remapped user
  std::vector<std::int64_t> item_ids;
  std::size_t lines = 0;      // records read, including overwritten ones
  std::size_t duplicates = 0; // records replaced by a later one

  std::size_t size() const noexcept { return ratings.size(); }
  Index num_users() const noexcept { return static_cast<Index>(user_ids.size()); }
  Index num_items() const noexcept { return static_cast<Index>(item_ids.size()); }
};

struct RatingScale {
  double min = 1.0;
  double max = 5.0;
};

/// Blank lines are skipped. Throws ParseError with the line number for a
/// malformed record or a rating outside `scale`, and for input without records.
RatingsDataset parse_ratings(std::istream &is, RatingScale scale = {});
RatingsDataset read_ratings(const std::string &path, RatingScale scale = {});

struct RatingsSplit {
  ObservationSet train;
  ObservationSet test;
};

/// Disjoint random split of a users x items rating matrix. The test part holds
/// round(test_fraction * N) records chosen uniformly; both parts are sorted
/// column-major.
RatingsSplit split_ratings(const RatingsDataset &data, double test_fraction, RngSeed seed);

struct IngestResult {
  RatingsDataset data;
  RatingsSplit split;
};

IngestResult ingest_ratings(const std::string &path, RngSeed split_seed, double test_fraction = 0.2,
                            RatingScale scale = {});

} // namespace dys
