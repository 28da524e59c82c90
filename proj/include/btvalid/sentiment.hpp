#pragma once

// Lexicon sentiment: per-token valences in {-1, 0, +1}, text polarity
// (P - N) / max(1, P + N), accuracy against gold labels and bootstrap
// intervals over the original / pivot / backtranslated variants.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "btvalid/corpus.hpp"
#include "btvalid/stats.hpp"

namespace btvalid::sentiment {

using corpus::Polarity;

class ValenceLexicon {
 public:
  ValenceLexicon() = default;
  explicit ValenceLexicon(std::string lang) : lang_(std::move(lang)) {}

  /// Token is lowercased to the form clean_text emits. Throws DataError for a
  /// valence outside {-1, 0, +1}. An existing entry is kept.
  bool add(std::string_view token, int valence);
  int valence(std::string_view token) const;
  std::size_t size() const { return entries_.size(); }
  const std::string& lang() const { return lang_; }

  /// Same tokens, every valence sign-flipped.
  ValenceLexicon negated() const;

  /// TSV, one `token<TAB>valence` per line; blank lines and '#' comments skipped.
  static ValenceLexicon load_tsv(const std::filesystem::path& path, std::string lang);

 private:
  std::string lang_;
  std::unordered_map<std::string, int> entries_;
};

struct SentimentResult {
  std::string id;
  double polarity = 0.0;
  Polarity label = Polarity::neutral;
  std::size_t scored_word_count = 0;
};

SentimentResult score_text(std::string_view text, const ValenceLexicon& lexicon, std::string id = {});

enum class NeutralExclusion { none, gold, predicted, both };

std::string_view to_string(NeutralExclusion e);
NeutralExclusion neutral_exclusion_from_string(std::string_view s);

/// 1 for a correct prediction, 0 otherwise, over the items that survive
/// neutral exclusion.
std::vector<double> evaluable_matches(std::span<const SentimentResult> predictions, std::span<const Polarity> gold,
                                      NeutralExclusion exclusion);

/// nullopt when nothing is left to evaluate (undefined, not zero).
std::optional<double> accuracy(std::span<const SentimentResult> predictions, std::span<const Polarity> gold,
                               NeutralExclusion exclusion = NeutralExclusion::both);

struct AccuracySummary {
  std::size_t n_evaluable = 0;
  stats::IntervalSummary interval;
  bool operator==(const AccuracySummary&) const = default;
};

/// Percentile bootstrap of the accuracy; nullopt when undefined.
std::optional<AccuracySummary> bootstrap_accuracy(std::span<const SentimentResult> predictions,
                                                  std::span<const Polarity> gold, int replicates, std::uint64_t seed,
                                                  NeutralExclusion exclusion = NeutralExclusion::both,
                                                  double level = 0.99, const std::string& label = "sentiment");

/// Bootstrap of a precomputed 0/1 match vector.
std::optional<AccuracySummary> bootstrap_matches(std::span<const double> matches, int replicates,
                                                 const stats::RngStream& stream, double level);

// ---------------------------------------------------------------- report

struct VariantSummary {
  std::size_t n_evaluable = 0;
  double median = 0.0;
  double hci_low = 0.0;
  double hci_high = 0.0;
  bool operator==(const VariantSummary&) const = default;
};

/// original / pivot / back; nullopt = undefined or not computed.
using VariantTable = std::map<corpus::Variant, std::optional<VariantSummary>>;

struct SentimentOptions {
  int replicates = 1000;
  std::uint64_t seed = 0;
  double level = 0.99;
  NeutralExclusion exclusion = NeutralExclusion::both;
  bool operator==(const SentimentOptions&) const = default;
};

struct SentimentReport {
  std::map<std::string, VariantTable> languages;
  VariantTable pooled;
  std::vector<std::string> skipped;  // languages without a lexicon
  SentimentOptions options;
  bool operator==(const SentimentReport&) const = default;
};

/// Scores each variant with the matching lexicon (the pivot variant with the
/// pivot-language lexicon) against the gold labels. Every variant of one
/// language is bootstrapped from the same stream, "sentiment/<lang>", so
/// identical inputs yield identical summaries. Pooled rows concatenate the
/// evaluable items of all languages before bootstrapping.
SentimentReport sentiment_report(std::span<const corpus::Corpus> corpora,
                                 const std::map<std::string, ValenceLexicon>& lexicons, const std::string& pivot,
                                 const SentimentOptions& options = {});

nlohmann::json to_json(const SentimentReport& r);
SentimentReport sentiment_report_from_json(const nlohmann::json& j);

}  // namespace btvalid::sentiment
