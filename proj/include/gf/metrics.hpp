#pragma once

// Rank correlations and the train/val/test splitter.

#include <cstdint>
#include <string>
#include <vector>

namespace gf {

// Tau-b with tie corrections, O(n log n). NaN when either input is constant
// (tau-b is undefined there). Throws DataError on length mismatch or n < 2.
double kendall_tau(const std::vector<double>& x, const std::vector<double>& y);
// O(n^2) pair count; the reference for kendall_tau.
double kendall_tau_brute(const std::vector<double>& x, const std::vector<double>& y);

// Pearson correlation of average ranks; NaN when a rank vector is constant.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);
double pearson(const std::vector<double>& x, const std::vector<double>& y);

enum class Slice : std::uint8_t { Train, Val, Test };
const char* to_string(Slice s);

enum class BinMode { EqualWidth, Quantile };

struct SplitFractions {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

struct SplitAssignment {
  std::vector<Slice> slice;
  std::vector<int> bin;

  std::vector<std::size_t> rows(Slice s) const;
};

// Bins the targets, shuffles each bin with a seeded RNG and assigns
// round(val * n_bin) rows to val, round(test * n_bin) to test and the rest to
// train. bins = 1 gives a plain random split.
SplitAssignment stratified_split(const std::vector<double>& y, int bins, const SplitFractions& fractions,
                                 std::uint64_t seed, BinMode mode = BinMode::EqualWidth);

}  // namespace gf
