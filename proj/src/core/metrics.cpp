#include "gf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gf/error.hpp"
#include "gf/proxies.hpp"
#include "gf/rng.hpp"

namespace gf {

namespace {

void check_pair(const std::vector<double>& x, const std::vector<double>& y, const char* who) {
  if (x.size() != y.size()) throw DataError(std::string(who) + ": lengths differ");
  if (x.size() < 2) throw DataError(std::string(who) + ": need at least 2 observations");
}

using Count = long long;

Count tie_pairs(Count t) { return t * (t - 1) / 2; }

double tau_b(Count n0, Count n1, Count n2, Count s) {
  const double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  if (!(denom > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(s) / denom;
}

// Sorts v[lo, hi) ascending and returns the number of inversions.
Count merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  Count inv = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<Count>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<long>(lo), buf.begin() + static_cast<long>(hi), v.begin() + static_cast<long>(lo));
  return inv;
}

}  // namespace

double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
  check_pair(x, y, "kendall_tau");
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  Count n1 = 0, n3 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    n1 += tie_pairs(static_cast<Count>(j - i + 1));
    for (std::size_t a = i; a <= j;) {
      std::size_t b = a;
      while (b + 1 <= j && y[idx[b + 1]] == y[idx[a]]) ++b;
      n3 += tie_pairs(static_cast<Count>(b - a + 1));
      a = b + 1;
    }
    i = j + 1;
  }
  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  const Count swaps = merge_count(ys, buf, 0, n);
  Count n2 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && ys[j + 1] == ys[i]) ++j;
    n2 += tie_pairs(static_cast<Count>(j - i + 1));
    i = j + 1;
  }
  const Count n0 = tie_pairs(static_cast<Count>(n));
  // Concordant minus discordant pairs.
  const Count s = n0 - n1 - n2 + n3 - 2 * swaps;
  return tau_b(n0, n1, n2, s);
}

double kendall_tau_brute(const std::vector<double>& x, const std::vector<double>& y) {
  check_pair(x, y, "kendall_tau_brute");
  const std::size_t n = x.size();
  Count c = 0, d = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0.0) ++tx;
      if (dy == 0.0) ++ty;
      if (dx == 0.0 || dy == 0.0) continue;
      ((dx > 0.0) == (dy > 0.0) ? c : d) += 1;
    }
  return tau_b(tie_pairs(static_cast<Count>(n)), tx, ty, c - d);
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  check_pair(x, y, "pearson");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  check_pair(x, y, "spearman_rho");
  return pearson(average_ranks(x), average_ranks(y));
}

const char* to_string(Slice s) {
  switch (s) {
    case Slice::Train: return "train";
    case Slice::Val: return "val";
    case Slice::Test: return "test";
  }
  return "?";
}

std::vector<std::size_t> SplitAssignment::rows(Slice s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < slice.size(); ++i)
    if (slice[i] == s) out.push_back(i);
  return out;
}

SplitAssignment stratified_split(const std::vector<double>& y, int bins, const SplitFractions& f, std::uint64_t seed,
                                 BinMode mode) {
  if (bins < 1) throw ContractError("stratified_split: bins must be positive");
  if (y.size() < static_cast<std::size_t>(bins) * 3)
    throw DataError("stratified_split: need at least " + std::to_string(bins * 3) + " rows");
  if (f.train < 0.0 || f.val < 0.0 || f.test < 0.0 || std::fabs(f.train + f.val + f.test - 1.0) > 1e-9)
    throw ContractError("stratified_split: fractions must be non-negative and sum to 1");
  const std::size_t n = y.size();
  SplitAssignment a;
  a.slice.assign(n, Slice::Train);
  a.bin.assign(n, 0);
  const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
  const double lo = *lo_it, hi = *hi_it;
  const bool degenerate = !(hi > lo);
  if (degenerate) bins = 1;
  if (mode == BinMode::EqualWidth) {
    for (std::size_t i = 0; i < n && !degenerate; ++i) {
      const int b = static_cast<int>(std::floor((y[i] - lo) / (hi - lo) * bins));
      a.bin[i] = std::clamp(b, 0, bins - 1);
    }
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) { return y[p] < y[q]; });
    for (std::size_t r = 0; r < n; ++r) a.bin[order[r]] = static_cast<int>(r * static_cast<std::size_t>(bins) / n);
  }
  for (int b = 0; b < bins; ++b) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (a.bin[i] == b) members.push_back(i);
    if (members.empty()) continue;
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(b), 0x5b11}));
    std::shuffle(members.begin(), members.end(), rng);
    const double m = static_cast<double>(members.size());
    const auto n_val = static_cast<std::size_t>(std::lround(f.val * m));
    const auto n_test = std::min(members.size() - n_val, static_cast<std::size_t>(std::lround(f.test * m)));
    for (std::size_t k = 0; k < members.size(); ++k)
      a.slice[members[k]] = k < n_val ? Slice::Val : (k < n_val + n_test ? Slice::Test : Slice::Train);
  }
  return a;
}

}  // namespace gf
