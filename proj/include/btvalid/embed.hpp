#pragma once

// Sentence embeddings as unit-normalized sums of word vectors, cosine
// distances between originals and their backtranslations, and the minimum /
// mean peer-distance baselines they are judged against.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "btvalid/corpus.hpp"

namespace btvalid::embed {

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::string lang) : lang_(std::move(lang)) {}

  /// Text layout: one line per token, the token then `dim` decimal
  /// components, whitespace separated. A leading "<count> <dim>" header line
  /// is skipped. Tokens are lowercased. Duplicates keep the first vector (with
  /// a warning), unparseable lines are skipped with a warning, and a vector of
  /// the wrong length is fatal (DataError naming the line).
  static EmbeddingTable load(const std::filesystem::path& path, std::string lang = {});

  /// false if the token was already present. Throws DataError on a length mismatch.
  bool add(std::string_view token, std::span<const double> vec);
  /// nullptr for an unknown token.
  const double* find(std::string_view token) const;

  std::size_t dim() const { return dim_; }  // 0 while empty
  std::size_t size() const { return index_.size(); }
  bool empty() const { return index_.empty(); }
  const std::string& lang() const { return lang_; }

 private:
  std::string lang_;
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> data_;
};

struct SentenceVector {
  std::string id;
  std::vector<double> vector;  // unit norm, or empty when undefined
  std::size_t in_vocab_count = 0;

  bool defined() const { return !vector.empty(); }
};

/// Sum of the in-vocabulary token vectors divided by its Euclidean norm.
/// Undefined when no token is known (or the sum vanishes). Throws DataError
/// if the table is empty.
SentenceVector embed_sentence(std::span<const std::string> tokens, const EmbeddingTable& table, std::string id = {});

/// 1 - u.v / (|u| |v|), clamped to [0, 2]. Throws on undefined input or a
/// dimension mismatch.
double cosine_distance(const SentenceVector& u, const SentenceVector& v);
double cosine_distance(std::span<const double> u, std::span<const double> v);

struct BacktranslationDistances {
  std::vector<std::pair<std::string, double>> per_id;  // corpus order
  double mean = 0.0;
  std::size_t excluded = 0;
};

/// Distance between each record's original and back text embeddings. Records
/// undefined on either side are excluded and counted; DataError if none remain.
BacktranslationDistances backtranslation_distances(const corpus::Corpus& c, const EmbeddingTable& table);

struct PeerBaselines {
  double min_baseline = 0.0;
  double mean_baseline = 0.0;
  std::size_t anchors = 0;
  std::size_t peers_used = 0;
};

/// Every embeddable record is an anchor; it is compared with `peers` distinct
/// other records drawn from stream "peers/<index>", giving its minimum and
/// mean distance. The baselines average those over anchors. peers is clamped
/// to (anchors - 1) with a warning. DataError below two embeddable records.
PeerBaselines peer_baselines(const corpus::Corpus& c, const EmbeddingTable& table, std::size_t peers = 5000,
                             std::uint64_t seed = 0, unsigned threads = 0);

struct Verdict {
  bool passes_min = false;
  bool passes_mean = false;
};

/// Strictly below each baseline.
Verdict embedding_verdict(double mean_back_distance, const PeerBaselines& baselines);

// ---------------------------------------------------------------- report

struct LanguageEmbedding {
  double mean_back_distance = 0.0;
  double min_baseline = 0.0;
  double mean_baseline = 0.0;
  bool passes_min = false;
  bool passes_mean = false;
  std::size_t compared = 0;
  std::size_t excluded = 0;
  std::size_t peers_used = 0;
  bool operator==(const LanguageEmbedding&) const = default;
};

struct EmbeddingReport {
  std::map<std::string, LanguageEmbedding> languages;
  std::vector<std::string> skipped;  // no table for the language
  std::size_t peers = 5000;
  std::uint64_t seed = 0;
  bool operator==(const EmbeddingReport&) const = default;
};

EmbeddingReport embedding_report(std::span<const corpus::Corpus> corpora,
                                 const std::map<std::string, EmbeddingTable>& tables, std::size_t peers,
                                 std::uint64_t seed);

nlohmann::json to_json(const EmbeddingReport& r);
EmbeddingReport embedding_report_from_json(const nlohmann::json& j);

}  // namespace btvalid::embed
