#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace divc {

inline constexpr uint32_t kFreqTotal = 1u << 16;

// Static cumulative-frequency table for the range coder. Symbols are the
// integers [n_min, n_max] plus one trailing escape slot for out-of-range
// values. Frequencies are all >= 1 and sum to exactly 2^16, so every symbol
// stays codable.
struct CodingTable {
  int32_t n_min = 0;
  int32_t n_max = -1;
  std::vector<uint32_t> freq;  // in-range symbols, then escape (last entry)
  std::vector<uint32_t> cum;   // prefix sums; cum.back() == kFreqTotal

  size_t size() const { return freq.size(); }
  size_t escape_index() const { return freq.size() - 1; }
  bool contains(int32_t v) const { return v >= n_min && v <= n_max; }
  size_t index_of(int32_t v) const { return size_t(v - n_min); }

  void build_cum() {
    cum.resize(freq.size() + 1);
    cum[0] = 0;
    for (size_t i = 0; i < freq.size(); ++i) cum[i + 1] = cum[i] + freq[i];
    if (cum.back() != kFreqTotal) throw std::logic_error("coding table does not sum to 2^16");
  }

  /// Symbol index whose cumulative interval contains f (f in [0, kFreqTotal)).
  size_t find(uint32_t f) const {
    size_t lo = 0, hi = freq.size();
    while (hi - lo > 1) {
      size_t mid = (lo + hi) / 2;
      if (cum[mid] <= f) lo = mid;
      else hi = mid;
    }
    return lo;
  }

  double entropy_bits() const {
    double h = 0.0;
    for (uint32_t f : freq) {
      double p = double(f) / double(kFreqTotal);
      h -= p * std::log2(p);
    }
    return h;
  }
};

// Quantizes positive masses (escape mass last) to integer frequencies that
// sum to exactly 2^16 with a floor of 1 per symbol. Deterministic:
// largest-remainder apportionment with lowest-index tie break.
inline CodingTable make_table_from_masses(int32_t n_min, const std::vector<double>& masses) {
  if (masses.size() < 2) throw std::invalid_argument("table needs at least one symbol plus escape");
  if (masses.size() > kFreqTotal / 2) throw std::invalid_argument("too many symbols for 16-bit table");
  double total = 0.0;
  for (double m : masses) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw std::invalid_argument("bad mass");
    total += m;
  }
  if (!(total > 0.0)) throw std::invalid_argument("all masses zero");

  const size_t n = masses.size();
  CodingTable t;
  t.n_min = n_min;
  t.n_max = n_min + int32_t(n) - 2;
  t.freq.resize(n);

  std::vector<double> raw(n);
  int64_t sum = 0;
  for (size_t i = 0; i < n; ++i) {
    raw[i] = masses[i] / total * double(kFreqTotal);
    t.freq[i] = uint32_t(std::max<int64_t>(1, int64_t(raw[i])));
    sum += t.freq[i];
  }
  while (sum < int64_t(kFreqTotal)) {
    size_t best = 0;
    double best_rem = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) {
      double rem = raw[i] - double(t.freq[i]);
      if (rem > best_rem) {
        best_rem = rem;
        best = i;
      }
    }
    ++t.freq[best];
    ++sum;
  }
  while (sum > int64_t(kFreqTotal)) {
    size_t best = n;  // entry with the most excess over its raw share, freq > 1
    double best_excess = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) {
      if (t.freq[i] <= 1) continue;
      double excess = double(t.freq[i]) - raw[i];
      if (excess > best_excess) {
        best_excess = excess;
        best = i;
      }
    }
    if (best == n) throw std::logic_error("cannot normalize table");
    --t.freq[best];
    --sum;
  }
  t.build_cum();
  return t;
}

}  // namespace divc
