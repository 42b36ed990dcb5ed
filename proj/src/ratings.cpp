#include "dys/ratings.hpp"

#include "dys/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <string_view>

namespace dys {

namespace {

constexpr std::uint64_t stream_split = 101;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find("::", start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos)
      break;
    start = pos + 2;
  }
  return out;
}

std::int64_t parse_int(std::string_view s, std::size_t line, const char *what) {
  s = trim(s);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(line, std::string("bad ") + what + " '" + std::string(s) + "'");
  return v;
}

double parse_real(std::string_view s, std::size_t line, const char *what) {
  s = trim(s);
  std::string buf(s);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(buf, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (buf.empty() || used != buf.size() || !std::isfinite(v))
    throw ParseError(line, std::string("bad ") + what + " '" + buf + "'");
  return v;
}

struct Record {
  double rating;
  std::int64_t timestamp;
};

std::vector<std::int64_t> keys_of(const std::map<std::int64_t, Index> &m) {
  std::vector<std::int64_t> out;
  out.reserve(m.size());
  for (const auto &kv : m)
    out.push_back(kv.first);
  return out;
}

ObservationSet build(const RatingsDataset &data, const std::vector<std::size_t> &pick) {
  std::vector<Entry> entries;
  entries.reserve(pick.size());
  for (std::size_t k : pick)
    entries.push_back({data.users[k], data.items[k], data.ratings[k]});
  std::sort(entries.begin(), entries.end(), [](const Entry &a, const Entry &b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  });
  return ObservationSet(data.num_users(), data.num_items(), std::move(entries));
}

} // namespace

RatingsDataset parse_ratings(std::istream &is, RatingScale scale) {
  if (!(scale.min <= scale.max))
    throw InvalidArgument("parse_ratings: empty rating scale");
  std::map<std::pair<std::int64_t, std::int64_t>, Record> records;
  RatingsDataset data;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const std::string_view text = trim(raw);
    if (text.empty())
      continue;
    const auto f = fields(text);
    if (f.size() != 4)
      throw ParseError(line, "expected UserID::MovieID::Rating::Timestamp");
    const auto user = parse_int(f[0], line, "user id");
    const auto item = parse_int(f[1], line, "item id");
    const double rating = parse_real(f[2], line, "rating");
    const auto stamp = parse_int(f[3], line, "timestamp");
    if (rating < scale.min || rating > scale.max)
      throw ParseError(line, "rating " + std::string(trim(f[2])) + " outside the rating scale");
    ++data.lines;
    const auto [it, fresh] = records.insert_or_assign({user, item}, Record{rating, stamp});
    if (!fresh)
      ++data.duplicates;
  }
  if (records.empty())
    throw ParseError(0, "ratings input contains no records");

  std::map<std::int64_t, Index> user_index;
  std::map<std::int64_t, Index> item_index;
  for (const auto &kv : records) {
    user_index.emplace(kv.first.first, 0);
    item_index.emplace(kv.first.second, 0);
  }
  Index next = 0;
  for (auto &kv : user_index)
    kv.second = next++;
  next = 0;
  for (auto &kv : item_index)
    kv.second = next++;
  data.user_ids = keys_of(user_index);
  data.item_ids = keys_of(item_index);

  data.users.reserve(records.size());
  for (const auto &[key, rec] : records) {
    data.users.push_back(user_index.at(key.first));
    data.items.push_back(item_index.at(key.second));
    data.ratings.push_back(rec.rating);
    data.timestamps.push_back(rec.timestamp);
  }
  return data;
}

RatingsDataset read_ratings(const std::string &path, RatingScale scale) {
  std::ifstream is(path);
  if (!is)
    throw std::runtime_error("cannot open ratings file '" + path + "'");
  return parse_ratings(is, scale);
}

RatingsSplit split_ratings(const RatingsDataset &data, double test_fraction, RngSeed seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0))
    throw InvalidArgument("split_ratings: test_fraction must lie in [0, 1)");
  const std::size_t n = data.size();
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  if (n_test >= n)
    throw InvalidArgument("split_ratings: split leaves no training entries");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_engine(seed, stream_split);
  // Partial Fisher-Yates: the first n_test slots form a uniform random subset.
  for (std::size_t i = 0; i < n_test; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  const std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  const std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  return {build(data, train), build(data, test)};
}

IngestResult ingest_ratings(const std::string &path, RngSeed split_seed, double test_fraction,
                            RatingScale scale) {
  IngestResult out;
  out.data = read_ratings(path, scale);
  out.split = split_ratings(out.data, test_fraction, split_seed);
  return out;
}

} // namespace dys
