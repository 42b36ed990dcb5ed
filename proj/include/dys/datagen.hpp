#pragma once

#include "dys/linalg.hpp"

#include <cstdint>
#include <random>

namespace dys {

struct RngSeed {
  std::uint64_t value = 0;
};

/// Independent engine for (seed, stream); generators use distinct streams so
/// that e.g. the support and the values of a signal never share draws.
std::mt19937_64 make_engine(RngSeed seed, std::uint64_t stream);

/// Seed for the i-th trial of an experiment with the given base seed.
RngSeed trial_seed(RngSeed base, std::uint64_t trial);

struct LowRankSample {
  Matrix M;
  Matrix left;  // n x r
  Matrix right; // n x r
};

/// M = M_L M_R^T with i.i.d. standard Gaussian n x r factors.
LowRankSample gen_low_rank(Index n, Index r, RngSeed seed);

/// `count` distinct indices of a rows x cols grid drawn uniformly among all
/// subsets of that size, sorted column-major. Values are zero.
ObservationSet sample_omega(Index rows, Index cols, std::size_t count, RngSeed seed);

struct DctSpec {
  Index m = 0;
  Index n = 0;
  int refinement = 1;
  Vector xi; // m samples from U[0, 1], shared by every column

  void validate() const;
};

DctSpec make_dct_spec(Index m, Index n, int refinement, RngSeed seed);

/// Oversampled DCT matrix: column i (1-based) is cos(2 i pi xi / F) / sqrt(m).
Matrix gen_dct_matrix(const DctSpec &spec);
Matrix gen_dct_matrix(Index m, Index n, int refinement, RngSeed seed);

/// max_{i != j} |<a_i, a_j>| / (||a_i|| ||a_j||).
double mutual_coherence(const Matrix &a);

/// Length-n signal with s Gaussian spikes whose pairwise index distance is at
/// least min_sep. Requires s * min_sep <= n.
Vector gen_sparse_signal(Index n, Index s, Index min_sep, RngSeed seed);

/// b + sigma g with g i.i.d. standard Gaussian.
Vector add_noise(const Vector &b, double sigma, RngSeed seed);

} // namespace dys
