#include "dys/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

namespace dys {

namespace {

constexpr std::uint64_t stream_low_rank = 1;
constexpr std::uint64_t stream_omega = 2;
constexpr std::uint64_t stream_dct = 3;
constexpr std::uint64_t stream_support = 4;
constexpr std::uint64_t stream_spikes = 5;
constexpr std::uint64_t stream_noise = 6;

Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64 &rng) {
  std::normal_distribution<double> normal;
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i)
      out(i, j) = normal(rng);
  return out;
}

} // namespace

std::mt19937_64 make_engine(RngSeed seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed.value),
                    static_cast<std::uint32_t>(seed.value >> 32),
                    static_cast<std::uint32_t>(stream), 0x6a09e667U};
  return std::mt19937_64(seq);
}

RngSeed trial_seed(RngSeed base, std::uint64_t trial) { return {base.value + trial}; }

LowRankSample gen_low_rank(Index n, Index r, RngSeed seed) {
  if (r < 1 || r > n)
    throw InvalidArgument("gen_low_rank: need 1 <= r <= n");
  auto rng = make_engine(seed, stream_low_rank);
  LowRankSample out;
  out.left = gaussian_matrix(n, r, rng);
  out.right = gaussian_matrix(n, r, rng);
  out.M = out.left * out.right.transpose();
  return out;
}

ObservationSet sample_omega(Index rows, Index cols, std::size_t count, RngSeed seed) {
  if (rows < 1 || cols < 1)
    throw InvalidArgument("sample_omega: empty grid");
  const auto total = static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols);
  if (count < 1 || count > total)
    throw InvalidArgument("sample_omega: count must lie in [1, rows * cols]");

  // Floyd's algorithm: uniform over all subsets of size `count`.
  auto rng = make_engine(seed, stream_omega);
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(count * 2);
  for (std::uint64_t j = total - count; j < total; ++j) {
    std::uniform_int_distribution<std::uint64_t> pick(0, j);
    const auto candidate = pick(rng);
    if (!chosen.insert(candidate).second)
      chosen.insert(j);
  }
  std::vector<std::uint64_t> linear(chosen.begin(), chosen.end());
  std::sort(linear.begin(), linear.end());

  std::vector<Entry> entries;
  entries.reserve(linear.size());
  for (auto idx : linear)
    entries.push_back({static_cast<Index>(idx % rows), static_cast<Index>(idx / rows), 0.0});
  return ObservationSet(rows, cols, std::move(entries));
}

void DctSpec::validate() const {
  if (m < 1 || n < 1)
    throw InvalidArgument("DctSpec: dimensions must be positive");
  if (refinement < 1)
    throw InvalidArgument("DctSpec: refinement factor must be at least 1");
  if (xi.size() != m)
    throw InvalidArgument("DctSpec: xi must have m entries");
  if ((xi.array() < 0.0).any() || (xi.array() > 1.0).any())
    throw InvalidArgument("DctSpec: xi entries must lie in [0, 1]");
}

DctSpec make_dct_spec(Index m, Index n, int refinement, RngSeed seed) {
  DctSpec spec{m, n, refinement, Vector(std::max<Index>(m, 0))};
  auto rng = make_engine(seed, stream_dct);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index i = 0; i < spec.xi.size(); ++i)
    spec.xi(i) = unit(rng);
  spec.validate();
  return spec;
}

Matrix gen_dct_matrix(const DctSpec &spec) {
  spec.validate();
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.m));
  Matrix a(spec.m, spec.n);
  for (Index col = 0; col < spec.n; ++col) {
    const double freq = 2.0 * std::numbers::pi * static_cast<double>(col + 1) / spec.refinement;
    for (Index row = 0; row < spec.m; ++row)
      a(row, col) = scale * std::cos(freq * spec.xi(row));
  }
  return a;
}

Matrix gen_dct_matrix(Index m, Index n, int refinement, RngSeed seed) {
  return gen_dct_matrix(make_dct_spec(m, n, refinement, seed));
}

double mutual_coherence(const Matrix &a) {
  const Vector norms = a.colwise().norm().transpose();
  const Matrix gram = a.transpose() * a;
  double best = 0.0;
  for (Index j = 0; j < gram.cols(); ++j)
    for (Index i = 0; i < j; ++i) {
      const double denom = norms(i) * norms(j);
      if (denom > 0.0)
        best = std::max(best, std::abs(gram(i, j)) / denom);
    }
  return best;
}

Vector gen_sparse_signal(Index n, Index s, Index min_sep, RngSeed seed) {
  if (n < 1 || s < 1 || s > n)
    throw InvalidArgument("gen_sparse_signal: need 1 <= s <= n");
  if (min_sep < 1)
    throw InvalidArgument("gen_sparse_signal: min_sep must be at least 1");
  if (s * min_sep > n)
    throw InvalidArgument("gen_sparse_signal: separation infeasible (s * min_sep > n)");

  auto rng = make_engine(seed, stream_support);
  std::vector<Index> support;
  constexpr int max_restarts = 100000;
  for (int attempt = 0; attempt < max_restarts; ++attempt) {
    support.clear();
    std::vector<char> blocked(static_cast<std::size_t>(n), 0);
    Index free_count = n;
    bool stuck = false;
    for (Index k = 0; k < s; ++k) {
      if (free_count == 0) {
        stuck = true;
        break;
      }
      std::uniform_int_distribution<Index> pick(0, free_count - 1);
      Index target = pick(rng);
      Index idx = 0;
      for (;; ++idx) {
        if (!blocked[idx] && target-- == 0)
          break;
      }
      support.push_back(idx);
      const Index lo = std::max<Index>(0, idx - min_sep + 1);
      const Index hi = std::min<Index>(n - 1, idx + min_sep - 1);
      for (Index j = lo; j <= hi; ++j) {
        if (!blocked[j]) {
          blocked[j] = 1;
          --free_count;
        }
      }
    }
    if (!stuck)
      break;
  }
  if (static_cast<Index>(support.size()) != s)
    throw InvalidArgument("gen_sparse_signal: could not place a separated support");

  std::sort(support.begin(), support.end());
  auto values = make_engine(seed, stream_spikes);
  std::normal_distribution<double> normal;
  Vector x = Vector::Zero(n);
  for (Index idx : support)
    x(idx) = normal(values);
  return x;
}

Vector add_noise(const Vector &b, double sigma, RngSeed seed) {
  if (!(sigma >= 0.0))
    throw InvalidArgument("add_noise: sigma must be nonnegative");
  if (sigma == 0.0)
    return b;
  auto rng = make_engine(seed, stream_noise);
  std::normal_distribution<double> normal;
  Vector out = b;
  for (Index i = 0; i < out.size(); ++i)
    out(i) += sigma * normal(rng);
  return out;
}

} // namespace dys
