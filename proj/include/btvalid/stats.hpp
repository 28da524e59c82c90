#pragma once

// Deterministic statistics kernel: labelled RNG streams, bootstrap, permutation.
//
// Every random draw in the toolkit comes from an RngStream identified by
// (root seed, label). The engine is std::mt19937_64 seeded through
// std::seed_seq with the seed words and the FNV-1a hash of the label; both
// algorithms are fully specified by the standard, so streams are identical on
// every conforming platform. Bounded integers and unit doubles are derived
// from the raw 64-bit output by our own code (std distributions are
// implementation-defined).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace btvalid::stats {

inline constexpr std::string_view kPrngId = "mt19937_64/seed_seq(seed,fnv1a64(label))/v1";

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string label);

  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }

  /// Fresh stream labelled "<label>/<sub>"; the parent is not advanced.
  RngStream child(std::string_view sub) const;

  std::uint64_t next() { return engine_(); }

  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t uniform_below(std::uint64_t n);

  /// Double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t seed_;
  std::string label_;
  std::mt19937_64 engine_;
};

struct IntervalSummary {
  double median = 0.0;
  double low = 0.0;
  double high = 0.0;
  double level = 0.0;
  int replicates = 0;

  bool operator==(const IntervalSummary&) const = default;
};

/// Percentile of ascending-sorted data with linear interpolation between
/// order statistics: h = (n - 1) q, x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
double percentile_sorted(std::span<const double> sorted, double q);

/// Median and central `level` interval of the given replicate statistics.
IntervalSummary summarize(std::vector<double> values, double level);

/// Percentile bootstrap. Replicate r draws its indices from stream.child(r),
/// so the result depends only on (items, seed, label), never on evaluation order.
template <class T, class Statistic>
IntervalSummary bootstrap(std::span<const T> items, Statistic&& statistic, int replicates,
                          double level, const RngStream& stream) {
  if (items.empty()) throw std::invalid_argument("bootstrap: empty item set");
  if (replicates < 1) throw std::invalid_argument("bootstrap: replicates must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("bootstrap: level must be in (0,1)");

  std::vector<double> values(static_cast<size_t>(replicates));
  std::vector<T> resample(items.size());
  for (int r = 0; r < replicates; ++r) {
    RngStream rs = stream.child(std::to_string(r));
    for (auto& slot : resample) slot = items[rs.uniform_below(items.size())];
    values[static_cast<size_t>(r)] = statistic(std::span<const T>(resample));
  }
  return summarize(std::move(values), level);
}

/// Uniform random permutation (Fisher-Yates).
template <class T>
std::vector<T> permute(std::vector<T> items, RngStream& stream) {
  for (size_t i = items.size(); i > 1; --i) {
    size_t j = stream.uniform_below(i);
    std::swap(items[i - 1], items[j]);
  }
  return items;
}

/// k distinct integers from [0, n), ascending (Floyd's algorithm).
std::vector<std::uint64_t> sample_indices(std::uint64_t n, std::uint64_t k, RngStream& stream);

double mean(std::span<const double> xs);

}  // namespace btvalid::stats
