#include "btvalid/stats.hpp"

#include <numeric>
#include <unordered_set>

#include "btvalid/hash.hpp"

namespace btvalid::stats {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::string_view label) {
  const std::uint64_t h = fnv1a64(label);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string label)
    : seed_(seed), label_(std::move(label)), engine_(make_engine(seed_, label_)) {}

RngStream RngStream::child(std::string_view sub) const {
  std::string l = label_;
  l += '/';
  l += sub;
  return RngStream(seed_, std::move(l));
}

std::uint64_t RngStream::uniform_below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
  // Reject the low (2^64 mod n) values so every residue is equally likely.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    std::uint64_t r = next();
    if (r >= threshold) return r % n;
  }
}

double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("percentile: empty data");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("percentile: q outside [0,1]");
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

IntervalSummary summarize(std::vector<double> values, double level) {
  std::sort(values.begin(), values.end());
  IntervalSummary s;
  s.level = level;
  s.replicates = static_cast<int>(values.size());
  s.median = percentile_sorted(values, 0.5);
  s.low = percentile_sorted(values, (1.0 - level) / 2.0);
  s.high = percentile_sorted(values, 1.0 - (1.0 - level) / 2.0);
  return s;
}

std::vector<std::uint64_t> sample_indices(std::uint64_t n, std::uint64_t k, RngStream& stream) {
  if (k > n) throw std::invalid_argument("sample_indices: k > n");
  std::vector<std::uint64_t> out;
  out.reserve(k);
  if (k == n) {
    out.resize(n);
    std::iota(out.begin(), out.end(), 0);
    return out;
  }
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(k * 2);
  for (std::uint64_t j = n - k; j < n; ++j) {
    std::uint64_t t = stream.uniform_below(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  out.assign(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty data");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace btvalid::stats
